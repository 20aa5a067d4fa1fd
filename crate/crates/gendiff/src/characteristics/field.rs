//! Scalar coefficient fields: the whitelisted closed-form catalog plus
//! opaque closures for library use.
//!
//! Spec files may only reference catalog formulas (they are exactly
//! reconstructible); closures exist so library callers can pass arbitrary
//! drift/volatility coefficients without going through the catalog.

use std::fmt;
use std::sync::Arc;

/// Closed-form formulas admissible in `gendiff-spec v1` files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Formula {
    /// Constant `c`.
    Const(f64),
    /// `exp(coeff * x^2)`.
    ExpQuad { coeff: f64 },
    /// `coeff * x^exponent` (exponent may be negative; domain responsibility
    /// lies with the enclosing spec's interval).
    Power { coeff: f64, exponent: f64 },
    /// `coeff * x`.
    Linear { coeff: f64 },
}

impl Formula {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Formula::Const(c) => c,
            Formula::ExpQuad { coeff } => (coeff * x * x).exp(),
            Formula::Power { coeff, exponent } => coeff * x.powf(exponent),
            Formula::Linear { coeff } => coeff * x,
        }
    }

    /// Catalog tag as written in spec files.
    pub fn tag(&self) -> String {
        match *self {
            Formula::Const(c) => format!("const({})", fmt_f64(c)),
            Formula::ExpQuad { coeff } => format!("exp-quad({})", fmt_f64(coeff)),
            Formula::Power { coeff, exponent } => {
                format!("power({},{})", fmt_f64(coeff), fmt_f64(exponent))
            }
            Formula::Linear { coeff } => format!("linear({})", fmt_f64(coeff)),
        }
    }

    /// Parses a catalog tag like `const(1)` or `exp-quad(-1)`.
    pub fn parse(tag: &str) -> Option<Formula> {
        let tag = tag.trim();
        let (name, rest) = tag.split_once('(')?;
        let args = rest.strip_suffix(')')?;
        let nums: Vec<f64> = if args.trim().is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|s| s.trim().parse::<f64>().ok())
                .collect::<Option<Vec<_>>>()?
        };
        match (name.trim(), nums.as_slice()) {
            ("const", [c]) => Some(Formula::Const(*c)),
            ("exp-quad", [c]) => Some(Formula::ExpQuad { coeff: *c }),
            ("power", [c, e]) => Some(Formula::Power { coeff: *c, exponent: *e }),
            ("linear", [c]) => Some(Formula::Linear { coeff: *c }),
            _ => None,
        }
    }
}

/// Prints an f64 so that parsing it back is lossless.
pub fn fmt_f64(x: f64) -> String {
    let s = format!("{x}");
    debug_assert_eq!(s.parse::<f64>().ok(), Some(x));
    s
}

/// A nonnegative-or-real scalar function of one variable.
#[derive(Clone)]
pub enum ScalarField {
    Formula(Formula),
    Closure(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl ScalarField {
    pub fn constant(c: f64) -> Self {
        ScalarField::Formula(Formula::Const(c))
    }

    pub fn from_fn<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        ScalarField::Closure(Arc::new(f))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ScalarField::Formula(f) => f.eval(x),
            ScalarField::Closure(f) => f(x),
        }
    }

    pub fn formula(&self) -> Option<Formula> {
        match self {
            ScalarField::Formula(f) => Some(*f),
            ScalarField::Closure(_) => None,
        }
    }

    /// True when the field is syntactically the zero function.
    pub fn is_zero(&self) -> bool {
        matches!(self, ScalarField::Formula(Formula::Const(c)) if *c == 0.0)
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Formula(fm) => write!(f, "ScalarField({})", fm.tag()),
            ScalarField::Closure(_) => write!(f, "ScalarField(<closure>)"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_round_trip() {
        for f in [
            Formula::Const(2.5),
            Formula::ExpQuad { coeff: -1.0 },
            Formula::Power { coeff: 1.0, exponent: -2.0 },
            Formula::Linear { coeff: -0.5 },
        ] {
            let back = Formula::parse(&f.tag()).unwrap();
            assert_eq!(f, back);
            assert_eq!(f.eval(0.7), back.eval(0.7));
        }
    }

    #[test]
    fn eval_matches_closed_form() {
        assert_eq!(Formula::ExpQuad { coeff: 1.0 }.eval(0.5), (0.25f64).exp());
        assert_eq!(Formula::Power { coeff: 1.0, exponent: -2.0 }.eval(2.0), 0.25);
        assert_eq!(Formula::Linear { coeff: -1.0 }.eval(3.0), -3.0);
    }

    #[test]
    fn bad_tags_rejected() {
        assert!(Formula::parse("exp-quad()").is_none());
        assert!(Formula::parse("unknown(1)").is_none());
        assert!(Formula::parse("const(a)").is_none());
    }
}
