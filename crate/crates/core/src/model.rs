//! Second-order mechanical models, their file format and first-order lift.

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Map, Value};

use crate::error::{Result, SsmError};
use crate::poly::{MultiIndex, PolynomialMap, RealPolynomial, Term, C64};

/// `M x'' + C x' + K x + f(x, x') = eps * 2 f^a(Omega) cos(Omega t)`, where
/// `f^a(Omega) = forcing * Omega^forcing_omega_power`.
#[derive(Clone, Debug, PartialEq)]
pub struct MechanicalModel {
    pub name: Option<String>,
    pub n: usize,
    pub mass: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    /// Map over `(x, x')` of dimension `2n` into `R^n`.
    pub nonlinearity: PolynomialMap,
    pub forcing: DVector<f64>,
    pub forcing_omega_power: u32,
}

impl MechanicalModel {
    pub fn new(
        mass: DMatrix<f64>,
        damping: DMatrix<f64>,
        stiffness: DMatrix<f64>,
        nonlinearity: PolynomialMap,
        forcing: DVector<f64>,
    ) -> Result<Self> {
        let model = MechanicalModel {
            name: None,
            n: mass.nrows(),
            mass,
            damping,
            stiffness,
            nonlinearity,
            forcing,
            forcing_omega_power: 0,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = Some(name.to_string());
        self
    }

    pub fn with_forcing_omega_power(mut self, power: u32) -> Self {
        self.forcing_omega_power = power;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Err(SsmError::DimensionMismatch("model has zero degrees of freedom".into()));
        }
        for (name, mat) in [("M", &self.mass), ("C", &self.damping), ("K", &self.stiffness)] {
            if mat.nrows() != n || mat.ncols() != n {
                return Err(SsmError::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            if mat.iter().any(|v| !v.is_finite()) {
                return Err(SsmError::Malformed(format!("{name} has non-finite entries")));
            }
        }
        if self.forcing.len() != n {
            return Err(SsmError::DimensionMismatch(format!(
                "forcing amplitude has length {}, expected {n}",
                self.forcing.len()
            )));
        }
        if self.nonlinearity.dim() != 2 * n || self.nonlinearity.codim() != n {
            return Err(SsmError::DimensionMismatch(format!(
                "nonlinearity maps R^{} -> R^{}, expected R^{} -> R^{n}",
                self.nonlinearity.dim(),
                self.nonlinearity.codim(),
                2 * n
            )));
        }
        for t in self.nonlinearity.terms() {
            let d = t.monomial.degree();
            if d < 2 {
                return Err(SsmError::LowDegreeNonlinearity { row: t.row, degree: d });
            }
            if t.coeff.im != 0.0 {
                return Err(SsmError::ComplexNonlinearity { row: t.row });
            }
        }
        let sv = self.mass.clone().singular_values();
        let smax = sv.max();
        let smin = sv.min();
        if !(smin > 0.0 && smax / smin < 1e14) {
            return Err(SsmError::SingularMass);
        }
        Ok(())
    }

    pub fn forcing_at(&self, omega: f64) -> DVector<f64> {
        &self.forcing * omega.powi(self.forcing_omega_power as i32)
    }

    pub fn is_symmetric(&self) -> bool {
        is_symmetric(&self.mass) && is_symmetric(&self.damping) && is_symmetric(&self.stiffness)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        Self::from_json(&v)
    }

    pub fn from_json(doc: &Value) -> Result<Self> {
        let obj = doc
            .as_object()
            .ok_or_else(|| SsmError::Malformed("model document must be an object".into()))?;
        let n = obj
            .get("n")
            .and_then(Value::as_u64)
            .ok_or_else(|| SsmError::Malformed("missing integer field 'n'".into()))?
            as usize;
        let mass = parse_matrix(obj, "M", n)?;
        let damping = match obj.get("C") {
            Some(_) => parse_matrix(obj, "C", n)?,
            None => DMatrix::zeros(n, n),
        };
        let stiffness = parse_matrix(obj, "K", n)?;
        let mut terms = Vec::new();
        if let Some(nl) = obj.get("nonlinearity") {
            let list = nl
                .as_array()
                .ok_or_else(|| SsmError::Malformed("'nonlinearity' must be a list".into()))?;
            for (ti, item) in list.iter().enumerate() {
                terms.push(parse_term(item, ti)?);
            }
        }
        for t in &terms {
            if t.row >= n {
                return Err(SsmError::DimensionMismatch(format!(
                    "nonlinear term row {} outside 0..{n}",
                    t.row
                )));
            }
            if t.monomial.max_position().is_some_and(|p| p >= 2 * n) {
                return Err(SsmError::DimensionMismatch(format!(
                    "monomial position outside 0..{}",
                    2 * n
                )));
            }
        }
        let nonlinearity = PolynomialMap::from_terms(2 * n, n, terms)?;
        let (forcing, power) = match obj.get("forcing") {
            None => (DVector::zeros(n), 0),
            Some(f) => {
                let amp = f
                    .get("amplitude")
                    .and_then(Value::as_array)
                    .ok_or_else(|| SsmError::Malformed("forcing.amplitude must be a list".into()))?;
                let vals = amp
                    .iter()
                    .map(|x| {
                        x.as_f64().ok_or_else(|| {
                            SsmError::Malformed("forcing amplitude must be real".into())
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                if vals.len() != n {
                    return Err(SsmError::DimensionMismatch(format!(
                        "forcing amplitude has length {}, expected {n}",
                        vals.len()
                    )));
                }
                let power = f.get("omega_power").and_then(Value::as_u64).unwrap_or(0) as u32;
                (DVector::from_vec(vals), power)
            }
        };
        let model = MechanicalModel {
            name: obj.get("name").and_then(Value::as_str).map(str::to_string),
            n,
            mass,
            damping,
            stiffness,
            nonlinearity,
            forcing,
            forcing_omega_power: power,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> Value {
        let dense = |m: &DMatrix<f64>| {
            let rows: Vec<Vec<f64>> =
                (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect();
            json!({ "dense": rows })
        };
        let nl: Vec<Value> = self
            .nonlinearity
            .terms()
            .iter()
            .map(|t| {
                let mono: Vec<[u64; 2]> =
                    t.monomial.pairs().iter().map(|&(p, e)| [p as u64, e as u64]).collect();
                json!({ "row": t.row, "monomial": mono, "coeff": t.coeff.re })
            })
            .collect();
        let mut forcing = Map::new();
        forcing.insert("amplitude".into(), json!(self.forcing.as_slice()));
        if self.forcing_omega_power != 0 {
            forcing.insert("omega_power".into(), json!(self.forcing_omega_power));
        }
        let mut obj = Map::new();
        if let Some(name) = &self.name {
            obj.insert("name".into(), json!(name));
        }
        obj.insert("n".into(), json!(self.n));
        obj.insert("M".into(), dense(&self.mass));
        obj.insert("C".into(), dense(&self.damping));
        obj.insert("K".into(), dense(&self.stiffness));
        obj.insert("nonlinearity".into(), Value::Array(nl));
        obj.insert("forcing".into(), Value::Object(forcing));
        Value::Object(obj)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("model serializes")
    }
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    m.nrows() == m.ncols() && (0..m.nrows()).all(|i| (0..i).all(|j| m[(i, j)] == m[(j, i)]))
}

fn parse_matrix(obj: &Map<String, Value>, key: &str, n: usize) -> Result<DMatrix<f64>> {
    let block = obj
        .get(key)
        .ok_or_else(|| SsmError::Malformed(format!("missing matrix '{key}'")))?;
    if let Some(rows) = block.get("dense") {
        let rows = rows
            .as_array()
            .ok_or_else(|| SsmError::Malformed(format!("{key}.dense must be a list of rows")))?;
        if rows.len() != n {
            return Err(SsmError::DimensionMismatch(format!(
                "{key} has {} rows, expected {n}",
                rows.len()
            )));
        }
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            let row = row
                .as_array()
                .ok_or_else(|| SsmError::Malformed(format!("{key} row {i} is not a list")))?;
            if row.len() != n {
                return Err(SsmError::DimensionMismatch(format!(
                    "{key} row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, x) in row.iter().enumerate() {
                m[(i, j)] = x
                    .as_f64()
                    .ok_or_else(|| SsmError::Malformed(format!("{key}[{i}][{j}] is not a number")))?;
            }
        }
        Ok(m)
    } else if let Some(trips) = block.get("triplets") {
        let trips = trips
            .as_array()
            .ok_or_else(|| SsmError::Malformed(format!("{key}.triplets must be a list")))?;
        let mut m = DMatrix::zeros(n, n);
        for t in trips {
            let t = t.as_array().filter(|a| a.len() == 3).ok_or_else(|| {
                SsmError::Malformed(format!("{key} triplet must be [i, j, value]"))
            })?;
            let i = t[0].as_u64().ok_or_else(|| SsmError::Malformed("triplet row".into()))?
                as usize;
            let j = t[1].as_u64().ok_or_else(|| SsmError::Malformed("triplet column".into()))?
                as usize;
            let v = t[2].as_f64().ok_or_else(|| SsmError::Malformed("triplet value".into()))?;
            if i >= n || j >= n {
                return Err(SsmError::DimensionMismatch(format!(
                    "{key} triplet ({i}, {j}) outside {n}x{n}"
                )));
            }
            m[(i, j)] += v;
        }
        Ok(m)
    } else {
        Err(SsmError::Malformed(format!("{key} needs a 'dense' or 'triplets' form")))
    }
}

fn parse_term(item: &Value, ti: usize) -> Result<Term> {
    let row = item
        .get("row")
        .and_then(Value::as_u64)
        .ok_or_else(|| SsmError::Malformed(format!("nonlinear term {ti} lacks 'row'")))?
        as usize;
    let mono = item
        .get("monomial")
        .and_then(Value::as_array)
        .ok_or_else(|| SsmError::Malformed(format!("nonlinear term {ti} lacks 'monomial'")))?;
    let mut pairs = Vec::with_capacity(mono.len());
    for pe in mono {
        let pe = pe.as_array().filter(|a| a.len() == 2).ok_or_else(|| {
            SsmError::Malformed(format!("term {ti}: monomial entries are [position, exponent]"))
        })?;
        let p = pe[0].as_u64().ok_or_else(|| SsmError::Malformed("monomial position".into()))?;
        let e = pe[1].as_u64().ok_or_else(|| SsmError::Malformed("monomial exponent".into()))?;
        pairs.push((p as usize, e as u32));
    }
    let coeff = match item.get("coeff") {
        Some(Value::Number(x)) => C64::new(x.as_f64().unwrap_or(f64::NAN), 0.0),
        Some(Value::Array(a)) if a.len() == 2 => C64::new(
            a[0].as_f64().unwrap_or(f64::NAN),
            a[1].as_f64().unwrap_or(f64::NAN),
        ),
        _ => return Err(SsmError::Malformed(format!("nonlinear term {ti} lacks 'coeff'"))),
    };
    if !coeff.re.is_finite() || !coeff.im.is_finite() {
        return Err(SsmError::Malformed(format!("nonlinear term {ti} has a non-finite coefficient")));
    }
    if coeff.im != 0.0 {
        return Err(SsmError::ComplexNonlinearity { row });
    }
    let monomial = MultiIndex::from_pairs(pairs);
    if monomial.degree() < 2 {
        return Err(SsmError::LowDegreeNonlinearity { row, degree: monomial.degree() });
    }
    Ok(Term { row, monomial, coeff })
}

/// `B z' = A z + F(z) + eps F^ext`, with `z = (x, x')`.
#[derive(Clone, Debug)]
pub struct FirstOrderSystem {
    pub n: usize,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub f: PolynomialMap,
    pub f_real: RealPolynomial,
    /// `F^a = (f^a, 0)` at unit excitation frequency.
    pub fext: DVector<f64>,
    pub forcing_omega_power: u32,
    pub symmetric: bool,
}

impl FirstOrderSystem {
    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn fext_at(&self, omega: f64) -> DVector<f64> {
        &self.fext * omega.powi(self.forcing_omega_power as i32)
    }
}

/// Assembles `A = [[-K, 0], [0, M]]`, `B = [[C, M], [M, 0]]`, `F = (-f, 0)`.
pub fn build_first_order(model: &MechanicalModel) -> FirstOrderSystem {
    let n = model.n;
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    let mut b = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, 0), (n, n)).copy_from(&(-&model.stiffness));
    a.view_mut((n, n), (n, n)).copy_from(&model.mass);
    b.view_mut((0, 0), (n, n)).copy_from(&model.damping);
    b.view_mut((0, n), (n, n)).copy_from(&model.mass);
    b.view_mut((n, 0), (n, n)).copy_from(&model.mass);
    let f = model
        .nonlinearity
        .embed_rows(2 * n, 0, -1.0)
        .expect("model nonlinearity rows fit the lifted codomain");
    let mut fext = DVector::zeros(2 * n);
    fext.rows_mut(0, n).copy_from(&model.forcing);
    let symmetric = is_symmetric(&a) && is_symmetric(&b);
    debug_assert!(!model.is_symmetric() || symmetric);
    FirstOrderSystem {
        n,
        f_real: f.to_real(),
        a,
        b,
        f,
        fext,
        forcing_omega_power: model.forcing_omega_power,
        symmetric,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_dof() -> MechanicalModel {
        let one = DMatrix::from_element(1, 1, 1.0);
        MechanicalModel::new(
            one.clone(),
            one.clone(),
            one,
            PolynomialMap::zero(2, 1),
            DVector::zeros(1),
        )
        .unwrap()
    }

    #[test]
    fn unit_lift() {
        let fo = build_first_order(&one_dof());
        assert_eq!(fo.a, DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]));
        assert_eq!(fo.b, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]));
        assert!(fo.symmetric);
    }

    #[test]
    fn empty_nonlinearity_is_linear_model() {
        let doc = r#"{"n": 1, "M": {"dense": [[1]]}, "K": {"dense": [[2]]}, "nonlinearity": [],
                      "forcing": {"amplitude": [0.5]}}"#;
        let m = MechanicalModel::from_json_str(doc).unwrap();
        assert!(m.nonlinearity.is_empty());
        assert_eq!(m.damping[(0, 0)], 0.0);
    }

    #[test]
    fn rejects_non_square_stiffness() {
        let doc = r#"{"n": 2, "M": {"dense": [[1,0],[0,1]]}, "K": {"dense": [[1,0,0],[0,1,0]]},
                      "nonlinearity": [], "forcing": {"amplitude": [0, 0]}}"#;
        let err = MechanicalModel::from_json_str(doc).unwrap_err();
        assert!(matches!(err, SsmError::DimensionMismatch(_)));
        assert!(err.to_string().contains("dimension mismatch"));
    }

    #[test]
    fn rejects_linear_term_and_singular_mass() {
        let doc = r#"{"n": 1, "M": {"dense": [[1]]}, "K": {"dense": [[1]]},
                      "nonlinearity": [{"row": 0, "monomial": [[0, 1]], "coeff": 1.0}]}"#;
        assert!(matches!(
            MechanicalModel::from_json_str(doc),
            Err(SsmError::LowDegreeNonlinearity { .. })
        ));
        let doc = r#"{"n": 1, "M": {"dense": [[0]]}, "K": {"dense": [[1]]}}"#;
        assert!(matches!(MechanicalModel::from_json_str(doc), Err(SsmError::SingularMass)));
    }

    #[test]
    fn triplets_and_duplicates_are_summed() {
        let doc = r#"{"n": 2, "M": {"triplets": [[0,0,1],[1,1,0.5],[1,1,0.5]]},
                      "K": {"triplets": [[0,0,1],[1,1,1]]},
                      "nonlinearity": [{"row": 0, "monomial": [[0, 3]], "coeff": 1.0},
                                       {"row": 0, "monomial": [[0, 2],[0, 1]], "coeff": 2.0}],
                      "forcing": {"amplitude": [1, 0]}}"#;
        let m = MechanicalModel::from_json_str(doc).unwrap();
        assert_eq!(m.mass[(1, 1)], 1.0);
        assert_eq!(m.nonlinearity.len(), 1);
        assert_eq!(m.nonlinearity.terms()[0].coeff.re, 3.0);
    }

    #[test]
    fn rejects_complex_coefficient() {
        let doc = r#"{"n": 1, "M": {"dense": [[1]]}, "K": {"dense": [[1]]},
                      "nonlinearity": [{"row": 0, "monomial": [[0, 3]], "coeff": [1.0, 0.5]}]}"#;
        assert!(matches!(
            MechanicalModel::from_json_str(doc),
            Err(SsmError::ComplexNonlinearity { row: 0 })
        ));
    }
}
