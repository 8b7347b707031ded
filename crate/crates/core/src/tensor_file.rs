//! JSON tensor files: a header `{n, r, d, scalar_kind}` and the coefficients
//! in canonical basis order.
//!
//! Complex entries are `[re, im]` pairs written in shortest round-trip form,
//! `F_p` entries are integers in `[0, p)` and rationals are strings `"a/b"`.
//! Reading a written file gives back the identical bits.

use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::formats::Format;
use crate::multipoly::{ScalarKind, Section};

#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    Complex(Vec<Complex64>),
    Fp { prime: u64, values: Vec<u64> },
    Rational(Vec<BigRational>),
}

impl Coefficients {
    pub fn len(&self) -> usize {
        match self {
            Coefficients::Complex(v) => v.len(),
            Coefficients::Fp { values, .. } => values.len(),
            Coefficients::Rational(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ScalarKind {
        match self {
            Coefficients::Complex(_) => ScalarKind::Complex,
            Coefficients::Fp { prime, .. } => ScalarKind::Fp { prime: *prime },
            Coefficients::Rational(_) => ScalarKind::Rational,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub format: Format,
    pub coeffs: Coefficients,
}

#[derive(Serialize, Deserialize)]
struct Wire {
    n: usize,
    r: Vec<usize>,
    d: Vec<usize>,
    scalar_kind: ScalarKind,
    coeffs: Vec<Value>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::TensorFile(msg.into())
}

fn float(v: f64) -> Result<Value> {
    serde_json::Number::from_f64(v).map(Value::Number).ok_or_else(|| bad(format!("non-finite coefficient {v}")))
}

impl TensorFile {
    pub fn new(format: Format, coeffs: Coefficients) -> Result<Self> {
        let n = format.ncoeff_usize()?;
        if coeffs.len() != n {
            return Err(bad(format!("{} coefficients for format {format} with {n} monomials", coeffs.len())));
        }
        if let Coefficients::Fp { prime, values } = &coeffs {
            if let Some(v) = values.iter().find(|&&v| v >= *prime) {
                return Err(bad(format!("entry {v} not reduced modulo {prime}")));
            }
        }
        Ok(TensorFile { format, coeffs })
    }

    pub fn to_json(&self) -> Result<String> {
        let coeffs = match &self.coeffs {
            Coefficients::Complex(v) => {
                v.iter().map(|c| Ok(Value::Array(vec![float(c.re)?, float(c.im)?]))).collect::<Result<_>>()?
            }
            Coefficients::Fp { values, .. } => values.iter().map(|&x| Value::from(x)).collect(),
            Coefficients::Rational(v) => v.iter().map(|q| Value::String(q.to_string())).collect(),
        };
        let wire = Wire {
            n: self.format.n(),
            r: self.format.r().to_vec(),
            d: self.format.d().to_vec(),
            scalar_kind: self.coeffs.kind(),
            coeffs,
        };
        Ok(serde_json::to_string_pretty(&wire)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: Wire = serde_json::from_str(text)?;
        if wire.n != wire.r.len() {
            return Err(bad(format!("n = {} but {} factor dimensions", wire.n, wire.r.len())));
        }
        let format = Format::raw(wire.r, wire.d)?;
        let coeffs = match wire.scalar_kind {
            ScalarKind::Complex => Coefficients::Complex(
                wire.coeffs
                    .iter()
                    .map(|v| match v.as_array().map(|a| a.as_slice()) {
                        Some([re, im]) => match (re.as_f64(), im.as_f64()) {
                            (Some(re), Some(im)) => Ok(Complex64::new(re, im)),
                            _ => Err(bad(format!("non-numeric complex entry {v}"))),
                        },
                        _ => Err(bad(format!("complex entry {v} is not an [re, im] pair"))),
                    })
                    .collect::<Result<_>>()?,
            ),
            ScalarKind::Fp { prime } => Coefficients::Fp {
                prime,
                values: wire
                    .coeffs
                    .iter()
                    .map(|v| v.as_u64().ok_or_else(|| bad(format!("F_p entry {v} is not a nonnegative integer"))))
                    .collect::<Result<_>>()?,
            },
            ScalarKind::Rational => Coefficients::Rational(
                wire.coeffs
                    .iter()
                    .map(|v| {
                        let s = v.as_str().ok_or_else(|| bad(format!("rational entry {v} is not a string")))?;
                        BigRational::from_str(s).map_err(|e| bad(format!("rational entry {s:?}: {e}")))
                    })
                    .collect::<Result<_>>()?,
            ),
        };
        TensorFile::new(format, coeffs)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        TensorFile::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| bad(format!("{}: {e}", path.display())))
    }

    /// The coefficients as a complex section; `F_p` files are rejected.
    pub fn complex_section(&self) -> Result<Section<Complex64>> {
        let coeffs = match &self.coeffs {
            Coefficients::Complex(v) => v.clone(),
            Coefficients::Rational(v) => v
                .iter()
                .map(|q| {
                    use num_traits::ToPrimitive;
                    q.to_f64().map(|x| Complex64::new(x, 0.0)).ok_or_else(|| bad(format!("rational {q} out of range")))
                })
                .collect::<Result<_>>()?,
            Coefficients::Fp { .. } => return Err(bad("F_p coefficients have no complex embedding")),
        };
        Section::new(self.format.clone(), coeffs)
    }
}

impl From<&Section<Complex64>> for TensorFile {
    fn from(s: &Section<Complex64>) -> Self {
        TensorFile { format: s.format.clone(), coeffs: Coefficients::Complex(s.coeffs.clone()) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use proptest::prelude::*;

    fn fmt() -> Format {
        Format::raw(vec![1, 1], vec![2, 1]).unwrap()
    }

    #[test]
    fn header_layout() {
        let t = TensorFile::new(fmt(), Coefficients::Fp { prime: 7, values: vec![0, 1, 2, 3, 4, 5] }).unwrap();
        let v: Value = serde_json::from_str(&t.to_json().unwrap()).unwrap();
        assert_eq!(v["n"], 2);
        assert_eq!(v["r"], serde_json::json!([1, 1]));
        assert_eq!(v["d"], serde_json::json!([2, 1]));
        assert_eq!(v["scalar_kind"]["kind"], "fp");
        assert_eq!(v["coeffs"][5], 5);
    }

    #[test]
    fn rejects_malformed() {
        let ok = TensorFile::new(fmt(), Coefficients::Complex(vec![Complex64::new(1.0, 0.0); 6])).unwrap().to_json().unwrap();
        assert!(TensorFile::from_json(&ok).is_ok());
        assert!(TensorFile::from_json(&ok.replacen("\"n\": 2", "\"n\": 3", 1)).is_err());
        let v: Value = serde_json::from_str(&ok).unwrap();
        let mut short = v.clone();
        short["coeffs"].as_array_mut().unwrap().pop();
        assert!(TensorFile::from_json(&short.to_string()).is_err());
        let mut scalar = v.clone();
        scalar["coeffs"][0] = Value::from(1.0);
        assert!(TensorFile::from_json(&scalar.to_string()).is_err());
        assert!(TensorFile::new(fmt(), Coefficients::Fp { prime: 7, values: vec![7; 6] }).is_err());
        let nan = TensorFile::new(fmt(), Coefficients::Complex(vec![Complex64::new(f64::NAN, 0.0); 6])).unwrap();
        assert!(nan.to_json().is_err());
    }

    #[test]
    fn rational_strings() {
        let q = |a: i64, b: i64| BigRational::new(BigInt::from(a), BigInt::from(b));
        let vals = vec![q(1, 2), q(-3, 7), q(0, 1), q(5, 1), q(123456789, 1000000007), q(-1, 3)];
        let t = TensorFile::new(fmt(), Coefficients::Rational(vals)).unwrap();
        let json = t.to_json().unwrap();
        assert!(json.contains("\"-3/7\""));
        assert_eq!(TensorFile::from_json(&json).unwrap(), t);
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![
            any::<f64>().prop_filter("finite", |x| x.is_finite()),
            Just(0.0),
            Just(-0.0),
            Just(f64::MIN_POSITIVE),
            Just(5e-324),
            Just(f64::MAX),
        ]
    }

    proptest! {
        #[test]
        fn complex_round_trip_is_bit_exact(vals in prop::collection::vec((finite(), finite()), 6)) {
            let coeffs: Vec<Complex64> = vals.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
            let t = TensorFile::new(fmt(), Coefficients::Complex(coeffs.clone())).unwrap();
            let back = TensorFile::from_json(&t.to_json().unwrap()).unwrap();
            let Coefficients::Complex(got) = back.coeffs else { panic!("kind changed") };
            for (a, b) in coeffs.iter().zip(&got) {
                prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
            prop_assert_eq!(back.format, fmt());
        }

        #[test]
        fn fp_round_trip(vals in prop::collection::vec(0u64..2_147_483_647, 6)) {
            let t = TensorFile::new(fmt(), Coefficients::Fp { prime: 2_147_483_647, values: vals }).unwrap();
            prop_assert_eq!(TensorFile::from_json(&t.to_json().unwrap()).unwrap(), t);
        }
    }
}
