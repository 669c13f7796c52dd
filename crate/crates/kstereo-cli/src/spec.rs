//! Product-manifold spec grammar.
//!
//! ```text
//! spec   := factor ("," factor)*
//! factor := DIM "x" COUNT ["@" FLOAT] ["!"]
//! ```
//!
//! `5x2` is two independent 5-dimensional factors with learnable curvature
//! starting at 0; `2x5@-1!` is five 2-dimensional factors frozen at
//! curvature -1.

use kstereo::manifold::{Curvature, Factor, ProductManifold};

#[derive(Debug, Clone, PartialEq)]
pub struct FactorGroup {
    pub dim: usize,
    pub count: usize,
    pub kappa0: f64,
    pub frozen: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldSpec {
    pub groups: Vec<FactorGroup>,
}

#[derive(Debug)]
pub struct SpecParseError {
    pub position: usize,
    pub detail: String,
}

impl std::fmt::Display for SpecParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "manifold spec error at position {}: {}",
            self.position, self.detail
        )
    }
}

fn err(position: usize, detail: impl Into<String>) -> SpecParseError {
    SpecParseError {
        position,
        detail: detail.into(),
    }
}

pub fn parse_manifold_spec(text: &str) -> Result<ManifoldSpec, SpecParseError> {
    let mut groups = Vec::new();
    let mut pos = 0usize;
    for part in text.split(',') {
        if part.is_empty() {
            return Err(err(pos, "empty factor"));
        }
        let (dim_str, rest) = part
            .split_once('x')
            .ok_or_else(|| err(pos, format!("factor {part:?} is missing 'x'")))?;
        let dim: usize = dim_str
            .parse()
            .map_err(|_| err(pos, format!("bad dimension {dim_str:?}")))?;
        if dim == 0 {
            return Err(err(pos, "dimension must be positive"));
        }
        let (rest, frozen) = match rest.strip_suffix('!') {
            Some(r) => (r, true),
            None => (rest, false),
        };
        let (count_str, kappa0) = match rest.split_once('@') {
            Some((c, k)) => {
                let kappa: f64 = k
                    .parse()
                    .map_err(|_| err(pos, format!("bad curvature {k:?}")))?;
                if !kappa.is_finite() {
                    return Err(err(pos, "curvature must be finite"));
                }
                (c, kappa)
            }
            None => (rest, 0.0),
        };
        let count: usize = count_str
            .parse()
            .map_err(|_| err(pos, format!("bad count {count_str:?}")))?;
        if count == 0 {
            return Err(err(pos, "count must be positive"));
        }
        groups.push(FactorGroup {
            dim,
            count,
            kappa0,
            frozen,
        });
        pos += part.len() + 1;
    }
    if groups.is_empty() {
        return Err(err(0, "empty spec"));
    }
    Ok(ManifoldSpec { groups })
}

impl ManifoldSpec {
    /// Canonical text form; parses back to an equal spec.
    pub fn render(&self) -> String {
        self.groups
            .iter()
            .map(|g| {
                let mut s = format!("{}x{}", g.dim, g.count);
                if g.kappa0 != 0.0 {
                    s.push('@');
                    s.push_str(&format!("{}", g.kappa0));
                }
                if g.frozen {
                    s.push('!');
                }
                s
            })
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Expand into a product manifold; every copy gets its own independent
    /// curvature, initialized identically.
    pub fn to_manifold(&self) -> ProductManifold {
        let mut factors = Vec::new();
        for g in &self.groups {
            for _ in 0..g.count {
                let c = if g.frozen {
                    Curvature::frozen(g.kappa0)
                } else {
                    Curvature::new(g.kappa0)
                };
                factors.push(Factor::new(g.dim, c));
            }
        }
        ProductManifold::new(factors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_table_style_products() {
        let spec = parse_manifold_spec("2x5").unwrap();
        assert_eq!(spec.groups.len(), 1);
        assert_eq!(spec.groups[0].dim, 2);
        assert_eq!(spec.groups[0].count, 5);
        assert_eq!(spec.groups[0].kappa0, 0.0);
        assert!(!spec.groups[0].frozen);
        let m = spec.to_manifold();
        assert_eq!(m.factors.len(), 5);
        assert_eq!(m.ambient_dim(), 10);
    }

    #[test]
    fn parses_curvature_and_freeze() {
        let spec = parse_manifold_spec("16x1@0!").unwrap();
        assert_eq!(spec.groups[0].dim, 16);
        assert!(spec.groups[0].frozen);
        let spec = parse_manifold_spec("2x5@-1!").unwrap();
        assert_eq!(spec.groups[0].kappa0, -1.0);
        assert!(spec.groups[0].frozen);
        let m = spec.to_manifold();
        assert!(m.factors.iter().all(|f| f.curvature.frozen));
    }

    #[test]
    fn rejects_zero_dims_and_counts() {
        assert!(parse_manifold_spec("3x0").is_err());
        assert!(parse_manifold_spec("0x3").is_err());
        assert!(parse_manifold_spec("").is_err());
        assert!(parse_manifold_spec("2y3").is_err());
        assert!(parse_manifold_spec("2x3@zzz").is_err());
    }

    #[test]
    fn error_positions_point_at_the_factor() {
        let e = parse_manifold_spec("2x2,3x0").unwrap_err();
        assert_eq!(e.position, 4);
    }

    #[test]
    fn canonical_round_trip() {
        for s in ["2x5", "5x2", "2x5@-1!", "3x1@0.5,2x2,7x1@-2.25!", "16x1"] {
            let a = parse_manifold_spec(s).unwrap();
            let b = parse_manifold_spec(&a.render()).unwrap();
            assert_eq!(a, b, "round trip of {s:?} via {:?}", a.render());
        }
    }
}
