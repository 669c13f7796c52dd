//! Minimal flag parser: `--name value` pairs and boolean switches.

use std::collections::BTreeMap;

pub struct Args {
    values: BTreeMap<String, String>,
    switches: Vec<String>,
}

pub enum ArgError {
    Help,
    Usage(String),
}

impl Args {
    /// Parse `--flag value` / `--switch` tokens against the allowed sets.
    /// `--help` anywhere short-circuits.
    pub fn parse(
        tokens: &[String],
        value_flags: &[&str],
        switch_flags: &[&str],
    ) -> Result<Args, ArgError> {
        let mut values = BTreeMap::new();
        let mut switches = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let tok = &tokens[i];
            if tok == "--help" || tok == "-h" {
                return Err(ArgError::Help);
            }
            let Some(name) = tok.strip_prefix("--") else {
                return Err(ArgError::Usage(format!("unexpected argument {tok:?}")));
            };
            if switch_flags.contains(&name) {
                switches.push(name.to_string());
                i += 1;
            } else if value_flags.contains(&name) {
                let Some(value) = tokens.get(i + 1) else {
                    return Err(ArgError::Usage(format!("--{name} expects a value")));
                };
                values.insert(name.to_string(), value.clone());
                i += 2;
            } else {
                return Err(ArgError::Usage(format!("unknown flag --{name}")));
            }
        }
        Ok(Args { values, switches })
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.values.get(name).map(|s| s.as_str())
    }

    pub fn required(&self, name: &str) -> Result<&str, ArgError> {
        self.get(name)
            .ok_or_else(|| ArgError::Usage(format!("missing required flag --{name}")))
    }

    pub fn has(&self, name: &str) -> bool {
        self.switches.iter().any(|s| s == name)
    }

    pub fn parse_num<T: std::str::FromStr>(&self, name: &str, default: T) -> Result<T, ArgError> {
        match self.get(name) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| ArgError::Usage(format!("--{name}: cannot parse {s:?}"))),
        }
    }
}
