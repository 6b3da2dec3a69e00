//! Sparse real polynomials in a fixed number of variables.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u8>, f64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, 1.0);
        p
    }

    pub fn monomial(exponents: &[u8], c: f64) -> Self {
        let mut p = Self::zero(exponents.len());
        p.add_term(exponents.to_vec(), c);
        p
    }

    /// Sums the given `(exponents, coefficient)` pairs.
    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Vec<u8>, f64)>) -> Self {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            assert_eq!(e.len(), nvars);
            p.add_term(e, c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u8>, &f64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms
            .keys()
            .map(|e| e.iter().map(|&k| k as usize).sum())
            .max()
            .unwrap_or(0)
    }

    fn add_term(&mut self, e: Vec<u8>, c: f64) {
        if c == 0.0 {
            return;
        }
        match self.terms.entry(e) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            p.add_term(e.clone(), c * s);
        }
        p
    }

    pub fn deriv(&self, i: usize) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut f = e.clone();
                f[i] -= 1;
                p.add_term(f, c * e[i] as f64);
            }
        }
        p
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .zip(x)
                    .fold(*c, |acc, (&k, &xi)| if k == 0 { acc } else { acc * xi.powi(k as i32) })
            })
            .sum()
    }

    /// Fixes the last variable, returning a polynomial in one fewer variable.
    pub fn substitute_last(&self, value: f64) -> Self {
        let mut p = Self::zero(self.nvars - 1);
        for (e, c) in &self.terms {
            let k = *e.last().unwrap();
            p.add_term(e[..self.nvars - 1].to_vec(), c * value.powi(k as i32));
        }
        p
    }

    /// Embeds into `nvars + extra` variables (new ones appended, unused).
    pub fn extend_vars(&self, extra: usize) -> Self {
        let mut p = Self::zero(self.nvars + extra);
        for (e, c) in &self.terms {
            let mut f = e.clone();
            f.extend(std::iter::repeat_n(0, extra));
            p.add_term(f, *c);
        }
        p
    }

    pub fn laplacian(&self) -> Self {
        (0..self.nvars).fold(Self::zero(self.nvars), |acc, i| &acc + &self.deriv(i).deriv(i))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    /// Drops coefficients below `tol` in absolute value.
    pub fn pruned(&self, tol: f64) -> Self {
        let mut p = self.clone();
        p.terms.retain(|_, c| c.abs() > tol);
        p
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, o: &Poly) -> Poly {
        assert_eq!(self.nvars, o.nvars);
        let mut p = self.clone();
        for (e, c) in &o.terms {
            p.add_term(e.clone(), *c);
        }
        p
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, o: &Poly) -> Poly {
        self + &o.scale(-1.0)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-1.0)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, o: &Poly) -> Poly {
        assert_eq!(self.nvars, o.nvars);
        let mut p = Poly::zero(self.nvars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                let e: Vec<u8> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                p.add_term(e, c1 * c2);
            }
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_and_euler_identity() {
        let x = Poly::var(3, 0);
        let y = Poly::var(3, 1);
        let p = &(&x * &x) * &y; // x²y
        let euler: Poly = (0..3).fold(Poly::zero(3), |acc, i| &acc + &(&Poly::var(3, i) * &p.deriv(i)));
        assert_eq!(euler, p.scale(3.0));
        assert_eq!(p.eval(&[2.0, 3.0, 5.0]), 12.0);
        assert!((&p - &p).is_zero());
    }

    #[test]
    fn substitution_drops_a_variable() {
        let p = &Poly::var(2, 0) * &(&Poly::var(2, 1) + &Poly::constant(2, 1.0));
        assert_eq!(p.substitute_last(2.0), Poly::var(1, 0).scale(3.0));
    }
}
