//! Total-degree monomial bases and polynomials that are linear in their
//! coefficients. Both the barrier `B(q, x)` and each controller component
//! `F_i(p_i, x)` are expressed over the state variables.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Result;
use crate::geometry::{check_dim, HyperRect};

/// All monomials `x^a` with `|a| <= degree`, ordered by total degree and then
/// lexicographically ascending on the exponent tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyBasis {
    nvars: usize,
    degree: u32,
    terms: Vec<Vec<u32>>,
}

impl PolyBasis {
    pub fn new(nvars: usize, degree: u32) -> Self {
        assert!(nvars >= 1, "a basis needs at least one variable");
        let mut terms = Vec::new();
        let mut current = vec![0u32; nvars];
        enumerate(&mut current, 0, degree, &mut terms);
        terms.sort_by(|a, b| {
            let (da, db): (u32, u32) = (a.iter().sum(), b.iter().sum());
            da.cmp(&db).then_with(|| a.cmp(b))
        });
        Self {
            nvars,
            degree,
            terms,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn terms(&self) -> &[Vec<u32>] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, exponents: &[u32]) -> Option<usize> {
        self.terms.iter().position(|t| t == exponents)
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.nvars, x.len())?;
        let mut out = vec![0.0; self.len()];
        self.eval_into(x, &mut out);
        Ok(out)
    }

    /// Monomial values written into `out`; `x` must have `nvars` entries.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nvars);
        if self.nvars == 1 {
            // terms are 1, x, x^2, ... in order
            let mut acc = 1.0;
            for slot in out.iter_mut() {
                *slot = acc;
                acc *= x[0];
            }
            return;
        }
        let k = self.degree as usize;
        let powers: Vec<Vec<f64>> = x
            .iter()
            .map(|&v| {
                let mut p = Vec::with_capacity(k + 1);
                let mut acc = 1.0;
                for _ in 0..=k {
                    p.push(acc);
                    acc *= v;
                }
                p
            })
            .collect();
        for (slot, term) in out.iter_mut().zip(&self.terms) {
            *slot = term
                .iter()
                .zip(&powers)
                .map(|(&e, p)| p[e as usize])
                .product();
        }
    }

    /// Per-term upper bound on `max_j |∂ x^a / ∂x_j|` over `rect`, by interval
    /// evaluation of the derivative monomials.
    pub fn gradient_bounds(&self, rect: &HyperRect) -> Result<Vec<f64>> {
        check_dim(self.nvars, rect.dim())?;
        let mags: Vec<f64> = rect
            .lower()
            .iter()
            .zip(rect.upper())
            .map(|(l, u)| l.abs().max(u.abs()))
            .collect();
        Ok(self
            .terms
            .iter()
            .map(|term| {
                (0..self.nvars)
                    .filter(|&j| term[j] > 0)
                    .map(|j| {
                        let mut b = term[j] as f64;
                        for (i, (&e, &m)) in term.iter().zip(&mags).enumerate() {
                            let e = if i == j { e - 1 } else { e };
                            b *= m.powi(e as i32);
                        }
                        b
                    })
                    .fold(0.0, f64::max)
            })
            .collect())
    }

    /// Rows of the Gram-matrix representation `p(x) = m(x)ᵀ G m(x)` over the
    /// half-degree basis, with every coefficient split evenly across the
    /// entries that multiply to its monomial. Each row lists
    /// `(term index, weight)` with weight `1 / multiplicity`.
    pub fn gram_rows(&self) -> Vec<Vec<(usize, f64)>> {
        let half = PolyBasis::new(self.nvars, self.degree.div_ceil(2));
        let sum = |a: &[u32], b: &[u32]| -> Vec<u32> { a.iter().zip(b).map(|(x, y)| x + y).collect() };
        let mut multiplicity = vec![0usize; self.len()];
        for a in half.terms() {
            for b in half.terms() {
                if let Some(idx) = self.index_of(&sum(a, b)) {
                    multiplicity[idx] += 1;
                }
            }
        }
        half.terms()
            .iter()
            .map(|a| {
                half.terms()
                    .iter()
                    .filter_map(|b| self.index_of(&sum(a, b)))
                    .map(|idx| (idx, 1.0 / multiplicity[idx] as f64))
                    .collect()
            })
            .collect()
    }
}

fn enumerate(current: &mut Vec<u32>, var: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
    if var == current.len() {
        out.push(current.clone());
        return;
    }
    for e in 0..=remaining {
        current[var] = e;
        enumerate(current, var + 1, remaining - e, out);
    }
    current[var] = 0;
}

/// Coefficient vector over a [`PolyBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    basis: PolyBasis,
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(basis: PolyBasis, coeffs: Vec<f64>) -> Result<Self> {
        check_dim(basis.len(), coeffs.len())?;
        Ok(Self { basis, coeffs })
    }

    pub fn zero(basis: PolyBasis) -> Self {
        let coeffs = vec![0.0; basis.len()];
        Self { basis, coeffs }
    }

    pub fn basis(&self) -> &PolyBasis {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let m = self.basis.eval(x)?;
        Ok(dot(&m, &self.coeffs))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Serialize, Deserialize)]
struct PolynomialRepr {
    nvars: usize,
    degree: u32,
    coeffs: Vec<f64>,
}

impl Serialize for Polynomial {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolynomialRepr {
            nvars: self.basis.nvars,
            degree: self.basis.degree,
            coeffs: self.coeffs.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = PolynomialRepr::deserialize(d)?;
        if repr.nvars == 0 {
            return Err(serde::de::Error::custom("polynomial needs nvars >= 1"));
        }
        Polynomial::new(PolyBasis::new(repr.nvars, repr.degree), repr.coeffs)
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn binomial(n: u64, k: u64) -> u64 {
        (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
    }

    /// Paper's certified barrier, coefficients of 1, x, …, x⁴.
    const ROOM_B: [f64; 5] = [0.0, 1.948e-3, 0.2395, -3.841e-2, 9.740e-4];
    const ROOM_C: [f64; 5] = [1.208e-5, 9.768e-2, -3.438e-3, 2.418e-5, 4.594e-7];

    #[test]
    fn basis_sizes() {
        assert_eq!(PolyBasis::new(1, 4).len(), 5);
        assert_eq!(PolyBasis::new(1, 0).len(), 1);
        let b = PolyBasis::new(2, 2);
        assert_eq!(b.len(), 6);
        assert_eq!(
            b.terms(),
            &[vec![0, 0], vec![0, 1], vec![1, 0], vec![0, 2], vec![1, 1], vec![2, 0]]
        );
        for n in 1..=4 {
            for k in 0..=6 {
                assert_eq!(
                    PolyBasis::new(n, k).len() as u64,
                    binomial(n as u64 + k as u64, k as u64),
                    "n={n} k={k}"
                );
            }
        }
    }

    #[test]
    fn univariate_eval() {
        let b = PolyBasis::new(1, 4);
        assert_eq!(b.eval(&[0.0]).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(b.eval(&[2.0]).unwrap(), vec![1.0, 2.0, 4.0, 8.0, 16.0]);
        assert!(b.eval(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn eval_matches_naive_powers() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let b = PolyBasis::new(3, 4);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let got = b.eval(&x).unwrap();
            for (term, v) in b.terms().iter().zip(got) {
                let mut naive = 1.0;
                for (j, &e) in term.iter().enumerate() {
                    for _ in 0..e {
                        naive *= x[j];
                    }
                }
                assert!((v - naive).abs() <= 1e-12 * naive.abs().max(1e-300), "{v} vs {naive}");
            }
        }
    }

    #[test]
    fn room_polynomials() {
        let b = PolyBasis::new(1, 4);
        let zero = Polynomial::zero(b.clone());
        assert_eq!(zero.eval(&[23.1]).unwrap(), 0.0);
        let barrier = Polynomial::new(b.clone(), ROOM_B.to_vec()).unwrap();
        assert_eq!(barrier.eval(&[0.0]).unwrap(), 0.0);
        let ctrl = Polynomial::new(b, ROOM_C.to_vec()).unwrap();
        let u = ctrl.eval(&[25.0]).unwrap();
        assert!((0.0..=1.0).contains(&u), "{u}");
    }

    #[test]
    fn gradient_bounds() {
        let b = PolyBasis::new(1, 3);
        let on_02 = b.gradient_bounds(&HyperRect::from_intervals(&[[0.0, 2.0]]).unwrap()).unwrap();
        assert_eq!(on_02[0], 0.0);
        assert_eq!(on_02[2], 4.0);
        let room = b
            .gradient_bounds(&HyperRect::from_intervals(&[[22.5, 26.5]]).unwrap())
            .unwrap();
        assert_relative_eq!(room[3], 2106.75);
        // x*y on [-1,2]x[0,3]: |∂x| <= 3, |∂y| <= 2
        let b2 = PolyBasis::new(2, 2);
        let r = HyperRect::new(vec![-1.0, 0.0], vec![2.0, 3.0]).unwrap();
        let gb = b2.gradient_bounds(&r).unwrap();
        assert_eq!(gb[b2.index_of(&[1, 1]).unwrap()], 3.0);
    }

    #[test]
    fn gram_rows_univariate_quartic() {
        let rows = PolyBasis::new(1, 4).gram_rows();
        let expect = [
            vec![(0, 1.0), (1, 0.5), (2, 1.0 / 3.0)],
            vec![(1, 0.5), (2, 1.0 / 3.0), (3, 0.5)],
            vec![(2, 1.0 / 3.0), (3, 0.5), (4, 1.0)],
        ];
        assert_eq!(rows.len(), 3);
        for (row, want) in rows.iter().zip(&expect) {
            assert_eq!(row.len(), want.len());
            for ((i, w), (j, v)) in row.iter().zip(want) {
                assert_eq!(i, j);
                assert_relative_eq!(*w, *v);
            }
        }
    }

    #[test]
    fn gram_reconstructs_polynomial() {
        // Σ_rows Σ_entries weight·q_idx·m_a(x)m_b(x) = B(x)
        let basis = PolyBasis::new(2, 3);
        let half = PolyBasis::new(2, 2);
        let q: Vec<f64> = (0..basis.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = [0.7, -1.3];
        let mh = half.eval(&x).unwrap();
        let rows = basis.gram_rows();
        let mut total = 0.0;
        for (ra, row) in rows.iter().enumerate() {
            // entries follow the half-basis order of the partner monomial
            let partners = (0..half.len()).filter(|&rb| {
                let s: Vec<u32> = half.terms()[ra]
                    .iter()
                    .zip(&half.terms()[rb])
                    .map(|(a, b)| a + b)
                    .collect();
                basis.index_of(&s).is_some()
            });
            for (&(idx, w), rb) in row.iter().zip(partners) {
                total += w * q[idx] * mh[ra] * mh[rb];
            }
        }
        let direct = Polynomial::new(basis, q).unwrap().eval(&x).unwrap();
        assert_relative_eq!(total, direct, max_relative = 1e-12);
    }

    #[test]
    fn serde_keeps_order() {
        let p = Polynomial::new(PolyBasis::new(2, 2), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let back: Polynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<Polynomial>(r#"{"nvars":1,"degree":2,"coeffs":[1.0]}"#).is_err());
    }

    proptest! {
        #[test]
        fn eval_is_linear_in_coefficients(
            a in -3.0f64..3.0, b in -3.0f64..3.0,
            x in proptest::collection::vec(-2.0f64..2.0, 2),
            p in proptest::collection::vec(-1.0f64..1.0, 10),
            r in proptest::collection::vec(-1.0f64..1.0, 10),
        ) {
            let basis = PolyBasis::new(2, 3);
            let combo: Vec<f64> = p.iter().zip(&r).map(|(u, v)| a * u + b * v).collect();
            let lhs = Polynomial::new(basis.clone(), combo).unwrap().eval(&x).unwrap();
            let rhs = a * Polynomial::new(basis.clone(), p).unwrap().eval(&x).unwrap()
                + b * Polynomial::new(basis, r).unwrap().eval(&x).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }
}
