//! Instance files and seeded instance generation.

use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CoronaError, Result};
use crate::matpoly::{MatPoly, MultiIndex};
use crate::pointwise::{delta_range, CoronaInstance};
use crate::CMat;

pub const SCHEMA_VERSION: u32 = 1;

/// One coefficient: exponent vector and a row-major matrix of `[re, im]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub index: Vec<usize>,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

/// Exponent `p`, written as a number or the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponent(pub f64);

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Exponent(v)),
            Raw::Text(t) if t == "inf" => Ok(Exponent(f64::INFINITY)),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("p must be a number or \"inf\", got {t:?}"))),
        }
    }
}

/// On-disk form of a [`CoronaInstance`] (pretty JSON).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub schema_version: u32,
    pub name: String,
    pub nvars: usize,
    pub rows: usize,
    pub cols: usize,
    pub degree: usize,
    #[serde(rename = "F")]
    pub f: Vec<TermRecord>,
    pub g: Vec<TermRecord>,
    pub delta_sq: f64,
    pub p: Exponent,
}

fn poly_records(p: &MatPoly) -> Vec<TermRecord> {
    p.terms()
        .map(|(idx, m)| TermRecord {
            index: idx.entries().to_vec(),
            matrix: (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect(),
        })
        .collect()
}

fn poly_from_records(field: &str, recs: &[TermRecord], rows: usize, cols: usize, nvars: usize) -> Result<MatPoly> {
    let mut p = MatPoly::zeros(rows, cols, nvars);
    for (k, rec) in recs.iter().enumerate() {
        let ctx = |msg: String| CoronaError::Parse(format!("{field}[{k}]: {msg}"));
        if rec.index.len() != nvars {
            return Err(ctx(format!("index has {} entries, expected {nvars}", rec.index.len())));
        }
        if rec.matrix.len() != rows || rec.matrix.iter().any(|r| r.len() != cols) {
            return Err(ctx(format!("matrix is not {rows}x{cols}")));
        }
        let m = CMat::from_fn(rows, cols, |i, j| Complex64::new(rec.matrix[i][j][0], rec.matrix[i][j][1]));
        p.add_term(MultiIndex::new(rec.index.clone()), m).map_err(|e| ctx(e.to_string()))?;
    }
    Ok(p)
}

impl InstanceFile {
    pub fn from_instance(inst: &CoronaInstance) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            name: inst.name.clone(),
            nvars: inst.nvars(),
            rows: inst.rows(),
            cols: inst.cols(),
            degree: inst.f.total_degree().max(inst.g.total_degree()),
            f: poly_records(&inst.f),
            g: poly_records(&inst.g),
            delta_sq: inst.delta_sq,
            p: Exponent(inst.p),
        }
    }

    pub fn to_instance(&self) -> Result<CoronaInstance> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CoronaError::Parse(format!("unsupported schema_version {}", self.schema_version)));
        }
        let f = poly_from_records("F", &self.f, self.rows, self.cols, self.nvars)?;
        let g = poly_from_records("g", &self.g, self.rows, 1, self.nvars)?;
        CoronaInstance::new(self.name.clone(), f, g, self.delta_sq, self.p.0)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text).map_err(|e| CoronaError::Parse(e.to_string()))?;
        file.to_instance()?;
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            CoronaError::Parse(msg) => CoronaError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Parameters of [`generate_instance`].
#[derive(Clone, Debug, PartialEq)]
pub struct GenerateSpec {
    /// `r`
    pub rows: usize,
    /// `m`, at least `r + 1`
    pub cols: usize,
    pub nvars: usize,
    /// total degree of the random block and of `g`
    pub degree: usize,
    /// `c` in `F0 = [c I | G]`, in `(0, 1)`
    pub delta_target: f64,
    pub seed: u64,
    /// scale of the random block `G`; `0` gives constant `F`
    pub coupling: f64,
}

impl GenerateSpec {
    pub fn new(rows: usize, cols: usize, nvars: usize, degree: usize, delta_target: f64, seed: u64) -> Self {
        Self { rows, cols, nvars, degree, delta_target, seed, coupling: 1.0 }
    }
}

/// All exponent vectors of total degree `<= degree` in `nvars` variables,
/// in lexicographic order.
pub fn monomials_up_to(nvars: usize, degree: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; nvars];
    fn rec(var: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
        if var == cur.len() {
            out.push(MultiIndex::new(cur.clone()));
            return;
        }
        for k in 0..=left {
            cur[var] = k;
            rec(var + 1, left - k, cur, out);
        }
        cur[var] = 0;
    }
    rec(0, degree, &mut cur, &mut out);
    out
}

fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Random polynomial with standard complex Gaussian coefficients over all
/// monomials of total degree `<= degree`, divided by the square root of
/// their count.
pub fn random_poly(rng: &mut ChaCha8Rng, rows: usize, cols: usize, nvars: usize, degree: usize) -> MatPoly {
    let monos = monomials_up_to(nvars, degree);
    let scale = (monos.len() as f64).sqrt().recip();
    let mut p = MatPoly::zeros(rows, cols, nvars);
    for idx in monos {
        let m = CMat::from_fn(rows, cols, |_, _| complex_gaussian(rng) * scale);
        p.add_term(idx, m).expect("shapes agree");
    }
    p
}

/// Seeded corona instance `F = [c I_r | G(z)]`, rescaled so that `FF* <= I`,
/// with `delta^2` taken from [`delta_range`] and a random `g` of unit `H^2`
/// norm.
///
/// Rescaling only happens when `sup lambda_max(F0 F0*)` exceeds one, so a
/// zero coupling leaves `F = [c I | 0]` and `delta^2 = c^2`.
pub fn generate_instance(spec: &GenerateSpec) -> Result<CoronaInstance> {
    let (r, m, n) = (spec.rows, spec.cols, spec.nvars);
    if r == 0 || n == 0 {
        return Err(CoronaError::InvalidArgument("rows and nvars must be positive".into()));
    }
    if m <= r {
        return Err(CoronaError::InvalidArgument(format!("cols {m} must exceed rows {r}")));
    }
    if !(spec.delta_target > 0.0 && spec.delta_target < 1.0) {
        return Err(CoronaError::InvalidArgument(format!("delta_target {} outside (0, 1)", spec.delta_target)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let block = random_poly(&mut rng, r, m - r, n, spec.degree).scale_real(spec.coupling);
    let mut f0 = MatPoly::zeros(r, m, n);
    let mut lead = CMat::zeros(r, m);
    for i in 0..r {
        lead[(i, i)] = Complex64::new(spec.delta_target, 0.0);
    }
    f0.add_term(MultiIndex::zero(n), lead)?;
    for (idx, c) in block.terms() {
        let mut full = CMat::zeros(r, m);
        full.view_mut((0, r), (r, m - r)).copy_from(c);
        f0.add_term(idx.clone(), full)?;
    }
    let f0 = f0.pruned();
    let est = delta_range(&f0, 16)?;
    let sup = est.sup_sq_est * (1.0 + 1e-6);
    let (f, delta_sq) = if sup > 1.0 {
        (f0.scale_real(sup.sqrt().recip()), est.delta_sq_est / sup)
    } else {
        (f0, est.delta_sq_est)
    };
    let g = random_poly(&mut rng, r, 1, n, spec.degree);
    let g = g.scale_real(g.coeff_norm().recip());
    let name = format!("gen-r{r}-m{m}-n{n}-d{}-s{}", spec.degree, spec.seed);
    CoronaInstance::new(name, f, g, (delta_sq * (1.0 - 1e-8)).min(1.0), 2.0)
}

/// `F = [z_1 ... z_n, c] / sqrt(1 + c^2)`, `g = 1`: the minimal `H^2`
/// solution is `(0, sqrt(1 + c^2) / c)` and `delta^2 = c^2 / (1 + c^2)`.
pub fn monomial_row_instance(c: f64, nvars: usize) -> Result<CoronaInstance> {
    let s = (1.0 + c * c).sqrt().recip();
    let mut f = MatPoly::zeros(1, 2, nvars);
    f.add_term(MultiIndex::new(vec![1; nvars]), CMat::from_row_slice(1, 2, &[Complex64::new(s, 0.0), Complex64::new(0.0, 0.0)]))?;
    f.add_term(MultiIndex::zero(nvars), CMat::from_row_slice(1, 2, &[Complex64::new(0.0, 0.0), Complex64::new(c * s, 0.0)]))?;
    let g = MatPoly::constant(CMat::from_element(1, 1, Complex64::new(1.0, 0.0)), nvars);
    CoronaInstance::new(format!("monomial-row-c{c}-n{nvars}"), f, g, c * c / (1.0 + c * c), 2.0)
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn files_round_trip(seed in 0u64..10_000, nvars in 1usize..=2) {
            let r = 1 + (seed % 2) as usize;
            let inst = generate_instance(&GenerateSpec::new(r, r + 1, nvars, 1 + (seed % 2) as usize, 0.4, seed)).unwrap();
            let text = InstanceFile::from_instance(&inst).to_json();
            let back = InstanceFile::from_json(&text).unwrap();
            prop_assert_eq!(back.to_json(), text);
        }
    }
}
