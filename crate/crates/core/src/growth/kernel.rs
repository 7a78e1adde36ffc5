use std::fmt;
use std::str::FromStr;

use super::GrowthError;

/// Degree-dependent attachment weight `phi` of a PA process.
///
/// `phi` is only ever evaluated at degrees `d >= 1`; the second node always
/// attaches to the first.
#[derive(Debug, Clone, PartialEq)]
pub enum AttachmentKernel {
    /// `phi(d) = 1`
    Uniform,
    /// `phi(d) = d`
    Linear,
    /// `phi(d) = max(alpha + beta * d, 0)`
    Affine { alpha: f64, beta: f64 },
    /// `phi(d) = max(D - d, 0)`: uniform attachment on the D-regular tree.
    DRegular(u32),
    /// `phi(d) = d^gamma` with `0 < gamma < 1`.
    Sublinear(f64),
    /// `phi(d) = w[d - 1]` for `d <= w.len()`, zero beyond.
    Table(Vec<f64>),
}

impl AttachmentKernel {
    #[inline]
    pub fn weight(&self, degree: usize) -> f64 {
        let d = degree as f64;
        match self {
            AttachmentKernel::Uniform => 1.0,
            AttachmentKernel::Linear => d,
            AttachmentKernel::Affine { alpha, beta } => (alpha + beta * d).max(0.0),
            AttachmentKernel::DRegular(cap) => (*cap as f64 - d).max(0.0),
            AttachmentKernel::Sublinear(gamma) => d.powf(*gamma),
            AttachmentKernel::Table(w) => {
                if degree >= 1 && degree <= w.len() {
                    w[degree - 1]
                } else {
                    0.0
                }
            }
        }
    }

    /// Checks parameter ranges and that growth can start (`phi(1) > 0`).
    pub fn validate(&self) -> Result<(), GrowthError> {
        let bad = |m: String| Err(GrowthError::InvalidKernel(m));
        match self {
            AttachmentKernel::Uniform | AttachmentKernel::Linear => Ok(()),
            AttachmentKernel::Affine { alpha, beta } => {
                if !alpha.is_finite() || !beta.is_finite() {
                    bad(format!("affine parameters must be finite, got {alpha},{beta}"))
                } else if alpha + beta <= 0.0 {
                    bad(format!("affine kernel needs phi(1) = alpha + beta > 0, got {}", alpha + beta))
                } else {
                    Ok(())
                }
            }
            AttachmentKernel::DRegular(cap) => {
                if *cap < 2 {
                    bad(format!("dreg needs D >= 2, got {cap}"))
                } else {
                    Ok(())
                }
            }
            AttachmentKernel::Sublinear(gamma) => {
                if *gamma > 0.0 && *gamma < 1.0 {
                    Ok(())
                } else {
                    bad(format!("sublinear exponent must lie in (0,1), got {gamma}"))
                }
            }
            AttachmentKernel::Table(w) => {
                if w.is_empty() {
                    bad("table kernel needs at least one weight".into())
                } else if let Some(x) = w.iter().find(|x| !x.is_finite() || **x < 0.0) {
                    bad(format!("table weights must be finite and nonnegative, got {x}"))
                } else if w[0] <= 0.0 {
                    bad("table kernel needs phi(1) > 0".into())
                } else {
                    Ok(())
                }
            }
        }
    }

    /// The `(alpha, beta)` with `phi(d) = max(alpha + beta d, 0)` for all
    /// `d >= 1`, if one exists.
    pub fn affine_form(&self) -> Option<(f64, f64)> {
        match self {
            AttachmentKernel::Uniform => Some((1.0, 0.0)),
            AttachmentKernel::Linear => Some((0.0, 1.0)),
            AttachmentKernel::Affine { alpha, beta } => Some((*alpha, *beta)),
            AttachmentKernel::DRegular(cap) => Some((*cap as f64, -1.0)),
            AttachmentKernel::Sublinear(_) => None,
            AttachmentKernel::Table(w) => table_affine_form(w),
        }
    }

    /// True iff the PA process driven by this kernel is shape exchangeable:
    /// `phi(d) = max(alpha + beta d, 0)` with either `beta < 0` and
    /// `alpha = -D beta` for an integer `D >= 2`, or `beta >= 0` and
    /// `alpha > -beta`.
    pub fn is_shape_exchangeable(&self) -> bool {
        match self.affine_form() {
            Some((alpha, beta)) => affine_is_exchangeable(alpha, beta),
            None => false,
        }
    }
}

pub(crate) fn affine_is_exchangeable(alpha: f64, beta: f64) -> bool {
    if !alpha.is_finite() || !beta.is_finite() {
        return false;
    }
    if beta < 0.0 {
        let cap = alpha / -beta;
        let rounded = cap.round();
        rounded >= 2.0 && (cap - rounded).abs() <= 1e-9 * rounded
    } else {
        alpha > -beta
    }
}

/// A table is zero beyond its support, so the only affine forms it can match
/// fall on the D-regular branch: positive weights `w_1..w_m` forming an
/// arithmetic progression that would reach zero exactly at `d = m + 1`.
fn table_affine_form(w: &[f64]) -> Option<(f64, f64)> {
    let m = w.iter().take_while(|&&x| x > 0.0).count();
    if m == 0 || w[m..].iter().any(|&x| x != 0.0) {
        return None;
    }
    let step = w[m - 1];
    let cap = (m + 1) as f64;
    let fits = w[..m].iter().enumerate().all(|(i, &x)| {
        let expected = (cap - (i + 1) as f64) * step;
        (x - expected).abs() <= 1e-9 * expected.abs().max(1e-300)
    });
    fits.then_some((cap * step, -step))
}

impl fmt::Display for AttachmentKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttachmentKernel::Uniform => write!(f, "uniform"),
            AttachmentKernel::Linear => write!(f, "linear"),
            AttachmentKernel::Affine { alpha, beta } => write!(f, "affine:{alpha},{beta}"),
            AttachmentKernel::DRegular(cap) => write!(f, "dreg:{cap}"),
            AttachmentKernel::Sublinear(gamma) => write!(f, "sublinear:{gamma}"),
            AttachmentKernel::Table(w) => {
                write!(f, "table:")?;
                for (i, x) in w.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for AttachmentKernel {
    type Err = GrowthError;

    /// Grammar: `uniform | linear | affine:a,b | dreg:D | sublinear:g |
    /// table:w1,w2,...`. The result is validated.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let err = |m: &str| GrowthError::KernelSyntax(format!("`{s}`: {m}"));
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let floats = |a: &str| -> Result<Vec<f64>, GrowthError> {
            a.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| err("expected a number")))
                .collect()
        };
        let kernel = match (name, args) {
            ("uniform", None) => AttachmentKernel::Uniform,
            ("linear", None) => AttachmentKernel::Linear,
            ("affine", Some(a)) => match floats(a)?.as_slice() {
                [alpha, beta] => AttachmentKernel::Affine { alpha: *alpha, beta: *beta },
                _ => return Err(err("affine takes exactly two parameters")),
            },
            ("dreg", Some(a)) => AttachmentKernel::DRegular(
                a.trim().parse().map_err(|_| err("dreg takes an integer D"))?,
            ),
            ("sublinear", Some(a)) => AttachmentKernel::Sublinear(
                a.trim().parse().map_err(|_| err("sublinear takes one exponent"))?,
            ),
            ("table", Some(a)) => AttachmentKernel::Table(floats(a)?),
            _ => return Err(err("unknown kernel; expected uniform, linear, affine:a,b, dreg:D, sublinear:g or table:w1,...")),
        };
        kernel.validate()?;
        Ok(kernel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exchangeability_classification() {
        assert!(AttachmentKernel::Linear.is_shape_exchangeable());
        assert!(AttachmentKernel::Uniform.is_shape_exchangeable());
        assert!(!AttachmentKernel::Sublinear(0.5).is_shape_exchangeable());
        assert!(AttachmentKernel::DRegular(8).is_shape_exchangeable());
        assert!(AttachmentKernel::Affine { alpha: 8.0, beta: 1.0 }.is_shape_exchangeable());
        assert!(AttachmentKernel::Affine { alpha: -0.5, beta: 1.0 }.is_shape_exchangeable());
        assert!(!AttachmentKernel::Affine { alpha: 5.5, beta: -1.0 }.is_shape_exchangeable());
        assert!(AttachmentKernel::Affine { alpha: 6.0, beta: -2.0 }.is_shape_exchangeable());
    }

    #[test]
    fn table_kernels_fit_affine_support() {
        assert!(AttachmentKernel::Table(vec![3.0, 2.0, 1.0]).is_shape_exchangeable());
        assert!(AttachmentKernel::Table(vec![1.5, 1.0, 0.5, 0.0]).is_shape_exchangeable());
        assert!(AttachmentKernel::Table(vec![7.0]).is_shape_exchangeable());
        assert!(!AttachmentKernel::Table(vec![1.0, 1.0]).is_shape_exchangeable());
        assert!(!AttachmentKernel::Table(vec![1.0, 2.0, 3.0]).is_shape_exchangeable());
        assert!(!AttachmentKernel::Table(vec![2.0, 0.0, 1.0]).is_shape_exchangeable());
        let t = AttachmentKernel::Table(vec![3.0, 2.0, 1.0]);
        for d in 1..8 {
            assert_eq!(t.weight(d), AttachmentKernel::DRegular(4).weight(d));
        }
    }

    #[test]
    fn equivalences() {
        for d in 1..10 {
            assert_eq!(AttachmentKernel::Uniform.weight(d), AttachmentKernel::Affine { alpha: 1.0, beta: 0.0 }.weight(d));
            assert_eq!(AttachmentKernel::Linear.weight(d), AttachmentKernel::Affine { alpha: 0.0, beta: 1.0 }.weight(d));
            assert_eq!(
                AttachmentKernel::DRegular(5).weight(d),
                AttachmentKernel::Affine { alpha: 5.0, beta: -1.0 }.weight(d)
            );
        }
    }

    #[test]
    fn parse_and_display() {
        for s in ["uniform", "linear", "affine:8,1", "dreg:8", "sublinear:0.5", "table:1,0.5,0.25"] {
            let k: AttachmentKernel = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
            assert_eq!(k.to_string().parse::<AttachmentKernel>().unwrap(), k);
        }
        assert!("dreg:1".parse::<AttachmentKernel>().is_err());
        assert!("sublinear:1.5".parse::<AttachmentKernel>().is_err());
        assert!("affine:1".parse::<AttachmentKernel>().is_err());
        assert!("affine:-1,0".parse::<AttachmentKernel>().is_err());
        assert!("table:0,1".parse::<AttachmentKernel>().is_err());
        assert!("quadratic".parse::<AttachmentKernel>().is_err());
    }
}
