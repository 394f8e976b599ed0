//! Monomials, the degree-lexicographic order, divisibility and borders.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// A monomial `x1^a1 * ... * xn^an`, stored as its dense exponent vector.
///
/// `Ord` is DegLex: total degree first, then the term with the larger
/// exponent on the earliest differing variable is the *smaller* one, so that
/// `1 < x1 < x2 < ... < xn < x1^2 < x1*x2 < ...`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Term(Vec<u32>);

impl Term {
    pub fn new(exponents: Vec<u32>) -> Self {
        Term(exponents)
    }

    /// The constant monomial in `n` variables.
    pub fn one(n: usize) -> Self {
        Term(vec![0; n])
    }

    /// The degree-1 monomial `x_{index+1}`.
    pub fn var(n: usize, index: usize) -> Self {
        let mut e = vec![0; n];
        e[index] = 1;
        Term(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn num_vars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul_var(&self, index: usize) -> Term {
        let mut e = self.0.clone();
        e[index] += 1;
        Term(e)
    }

    /// `self / x_{index+1}`, if that variable occurs.
    pub fn div_var(&self, index: usize) -> Option<Term> {
        if self.0[index] == 0 {
            return None;
        }
        let mut e = self.0.clone();
        e[index] -= 1;
        Some(Term(e))
    }

    /// `true` iff `self` divides `other`, i.e. componentwise `self <= other`.
    pub fn divides(&self, other: &Term) -> Result<bool> {
        check_dim(self.0.len(), other.0.len())?;
        Ok(self.0.iter().zip(&other.0).all(|(a, b)| a <= b))
    }

    /// Evaluate the monomial at one point.
    pub fn eval(&self, point: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(point)
            .filter(|(&e, _)| e > 0)
            .map(|(&e, &x)| x.powi(e as i32))
            .product()
    }
}

fn deglex(a: &[u32], b: &[u32]) -> Ordering {
    let da: u32 = a.iter().sum();
    let db: u32 = b.iter().sum();
    da.cmp(&db).then_with(|| {
        for (x, y) in a.iter().zip(b) {
            match x.cmp(y) {
                Ordering::Equal => continue,
                other => return other.reverse(),
            }
        }
        a.len().cmp(&b.len())
    })
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        deglex(&self.0, &other.0)
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            write!(f, "x{}", i + 1)?;
            if e > 1 {
                write!(f, "^{e}")?;
            }
        }
        Ok(())
    }
}

/// Compare two terms under DegLex, rejecting terms over different variable
/// counts.
pub fn deglex_compare(t: &Term, u: &Term) -> Result<Ordering> {
    check_dim(t.num_vars(), u.num_vars())?;
    Ok(t.cmp(u))
}

/// A strictly DegLex-increasing sequence of terms over a fixed number of
/// variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Term>", into = "Vec<Term>")]
pub struct TermList {
    #[serde(skip)]
    n: usize,
    terms: Vec<Term>,
}

impl TermList {
    pub fn empty(n: usize) -> Self {
        TermList {
            n,
            terms: Vec::new(),
        }
    }

    /// `{1}` over `n` variables.
    pub fn unit(n: usize) -> Self {
        TermList {
            n,
            terms: vec![Term::one(n)],
        }
    }

    /// Sorts and deduplicates `terms`.
    pub fn from_terms(n: usize, mut terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            check_dim(n, t.num_vars())?;
        }
        terms.sort();
        terms.dedup();
        Ok(TermList { n, terms })
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Term> {
        self.terms.iter()
    }

    pub fn get(&self, i: usize) -> Option<&Term> {
        self.terms.get(i)
    }

    pub fn position(&self, t: &Term) -> Option<usize> {
        self.terms.binary_search(t).ok()
    }

    pub fn contains(&self, t: &Term) -> bool {
        self.position(t).is_some()
    }

    /// Append a term that is larger than every term already present.
    pub fn push_max(&mut self, t: Term) -> Result<()> {
        check_dim(self.n, t.num_vars())?;
        if let Some(last) = self.terms.last() {
            if *last >= t {
                return Err(Error::Input(format!(
                    "term {t} is not larger than the current maximum {last}"
                )));
            }
        }
        self.terms.push(t);
        Ok(())
    }

    /// Insert keeping the DegLex order; returns the insertion index.
    pub fn insert(&mut self, t: Term) -> Result<usize> {
        check_dim(self.n, t.num_vars())?;
        match self.terms.binary_search(&t) {
            Ok(i) => Ok(i),
            Err(i) => {
                self.terms.insert(i, t);
                Ok(i)
            }
        }
    }

    /// `true` iff every divisor of every member is also a member.
    pub fn is_divisor_closed(&self) -> bool {
        self.terms.iter().all(|t| {
            (0..self.n).all(|i| match t.div_var(i) {
                Some(d) => self.contains(&d),
                None => true,
            })
        })
    }
}

impl TryFrom<Vec<Term>> for TermList {
    type Error = Error;

    fn try_from(terms: Vec<Term>) -> Result<Self> {
        let n = terms.first().map(Term::num_vars).unwrap_or(0);
        let list = TermList::from_terms(n, terms.clone())?;
        if list.terms != terms {
            return Err(Error::Input(
                "term list is not strictly DegLex-increasing".into(),
            ));
        }
        Ok(list)
    }
}

impl From<TermList> for Vec<Term> {
    fn from(list: TermList) -> Self {
        list.terms
    }
}

impl<'a> IntoIterator for &'a TermList {
    type Item = &'a Term;
    type IntoIter = std::slice::Iter<'a, Term>;

    fn into_iter(self) -> Self::IntoIter {
        self.terms.iter()
    }
}

/// The degree-`d` border of a divisor-closed `o`: all degree-`d` terms whose
/// proper divisors all lie in `o`.
///
/// Candidates are the degree-`(d-1)` members of `o` times each variable. For
/// a divisor-closed `o` it is enough to check the immediate divisors `u/x_i`.
pub fn border(o: &TermList, d: u32) -> TermList {
    let n = o.num_vars();
    if d == 0 {
        return TermList::empty(n);
    }
    let mut candidates: Vec<Term> = o
        .iter()
        .filter(|t| t.degree() == d - 1)
        .flat_map(|t| (0..n).map(move |i| t.mul_var(i)))
        .collect();
    candidates.sort();
    candidates.dedup();
    candidates.retain(|u| (0..n).all(|i| u.div_var(i).is_none_or(|v| o.contains(&v))));
    TermList {
        n,
        terms: candidates,
    }
}

/// All terms of total degree exactly `d` in `n` variables, DegLex-sorted.
pub fn generate_degree_terms(n: usize, d: u32) -> TermList {
    fn rec(prefix: &mut Vec<u32>, n: usize, left: u32, out: &mut Vec<Term>) {
        if prefix.len() == n - 1 {
            prefix.push(left);
            out.push(Term(prefix.clone()));
            prefix.pop();
            return;
        }
        // Larger leading exponents first: that is ascending DegLex.
        for e in (0..=left).rev() {
            prefix.push(e);
            rec(prefix, n, left - e, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(&mut Vec::with_capacity(n), n, d, &mut out);
    }
    TermList { n, terms: out }
}

/// Binomial coefficient as `f64`-safe `u128`.
pub fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n.saturating_sub(k));
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(e: &[u32]) -> Term {
        Term::new(e.to_vec())
    }

    #[test]
    fn deglex_chain_matches_reference_order() {
        // 1 < t < u < v < t^2 < t*u < t*v < u^2 < u*v < v^2 < t^3
        let chain = [
            t(&[0, 0, 0]),
            t(&[1, 0, 0]),
            t(&[0, 1, 0]),
            t(&[0, 0, 1]),
            t(&[2, 0, 0]),
            t(&[1, 1, 0]),
            t(&[1, 0, 1]),
            t(&[0, 2, 0]),
            t(&[0, 1, 1]),
            t(&[0, 0, 2]),
            t(&[3, 0, 0]),
        ];
        for w in chain.windows(2) {
            assert_eq!(
                deglex_compare(&w[0], &w[1]).unwrap(),
                Ordering::Less,
                "{:?}",
                w
            );
        }
    }

    #[test]
    fn deglex_examples() {
        assert_eq!(
            deglex_compare(&t(&[1, 0, 0]), &t(&[0, 1, 0])).unwrap(),
            Ordering::Less
        );
        assert_eq!(
            deglex_compare(&t(&[0, 0]), &t(&[0, 0])).unwrap(),
            Ordering::Equal
        );
        assert_eq!(
            deglex_compare(&t(&[2, 0, 0]), &t(&[1, 1, 0])).unwrap(),
            Ordering::Less
        );
        assert!(matches!(
            deglex_compare(&t(&[1]), &t(&[1, 0])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn divides_examples() {
        assert!(t(&[1, 0]).divides(&t(&[2, 1])).unwrap());
        assert!(t(&[0, 0]).divides(&t(&[3, 7])).unwrap());
        assert!(!t(&[2, 0]).divides(&t(&[1, 1])).unwrap());
        assert!(t(&[1]).divides(&t(&[1, 1])).is_err());
    }

    #[test]
    fn border_examples() {
        let o = TermList::unit(3);
        let b = border(&o, 1);
        assert_eq!(b.terms(), &[t(&[1, 0, 0]), t(&[0, 1, 0]), t(&[0, 0, 1])]);

        let o = TermList::from_terms(2, vec![t(&[0, 0]), t(&[1, 0]), t(&[0, 1])]).unwrap();
        assert_eq!(border(&o, 2).terms(), &[t(&[2, 0]), t(&[1, 1]), t(&[0, 2])]);

        let o = TermList::from_terms(2, vec![t(&[0, 0]), t(&[1, 0])]).unwrap();
        assert_eq!(border(&o, 2).terms(), &[t(&[2, 0])]);
    }

    #[test]
    fn border_of_exhausted_set_is_empty() {
        // O = {1}: no degree-1 member, so nothing at degree 2.
        assert!(border(&TermList::unit(2), 2).is_empty());
    }

    #[test]
    fn degree_term_examples() {
        assert_eq!(generate_degree_terms(2, 0).terms(), &[t(&[0, 0])]);
        assert_eq!(
            generate_degree_terms(2, 2).terms(),
            &[t(&[2, 0]), t(&[1, 1]), t(&[0, 2])]
        );
        assert_eq!(
            generate_degree_terms(3, 1).terms(),
            &[t(&[1, 0, 0]), t(&[0, 1, 0]), t(&[0, 0, 1])]
        );
        for n in 1..5usize {
            for d in 0..6u32 {
                let g = generate_degree_terms(n, d);
                assert_eq!(
                    g.len() as u128,
                    binomial((d as u64) + n as u64 - 1, d as u64)
                );
                assert!(g.terms().windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn term_list_json_is_exponent_arrays() {
        let o = TermList::from_terms(2, vec![t(&[0, 0]), t(&[1, 0])]).unwrap();
        let s = serde_json::to_string(&o).unwrap();
        assert_eq!(s, "[[0,0],[1,0]]");
        let back: TermList = serde_json::from_str(&s).unwrap();
        assert_eq!(back, o);
        assert!(serde_json::from_str::<TermList>("[[1,0],[0,0]]").is_err());
    }

    /// Definition-level border: every divisor of degree <= d-1 is in O.
    fn brute_force_border(o: &TermList, n: usize, d: u32) -> Vec<Term> {
        let lower: Vec<Term> = (0..d)
            .flat_map(|k| generate_degree_terms(n, k).terms().to_vec())
            .collect();
        generate_degree_terms(n, d)
            .terms()
            .iter()
            .filter(|u| {
                lower
                    .iter()
                    .filter(|t| t.divides(u).unwrap())
                    .all(|t| o.contains(t))
            })
            .cloned()
            .collect()
    }

    /// Random order ideal: the divisor closure of a few random generators.
    fn order_ideal(n: usize, seeds: &[Vec<u32>]) -> TermList {
        let mut all = vec![Term::one(n)];
        for s in seeds {
            let top: Vec<u32> = s.iter().take(n).cloned().collect();
            let mut stack = vec![Term::new(top)];
            while let Some(u) = stack.pop() {
                if all.contains(&u) {
                    continue;
                }
                for i in 0..n {
                    if let Some(v) = u.div_var(i) {
                        stack.push(v);
                    }
                }
                all.push(u);
            }
        }
        TermList::from_terms(n, all).unwrap()
    }

    fn arb_term() -> impl Strategy<Value = Term> {
        prop::collection::vec(0u32..4, 3).prop_map(Term::new)
    }

    proptest! {
        #[test]
        fn deglex_is_total_order(a in arb_term(), b in arb_term(), c in arb_term()) {
            prop_assert_eq!(a.cmp(&b), b.cmp(&a).reverse());
            if a <= b && b <= c {
                prop_assert!(a <= c);
            }
            prop_assert_eq!(a.cmp(&b) == Ordering::Equal, a == b);
            prop_assert!(Term::one(3) <= a);
        }

        #[test]
        fn border_matches_definition(
            n in 1usize..=4,
            seeds in prop::collection::vec(prop::collection::vec(0u32..3, 4), 0..4),
            d in 1u32..=4,
        ) {
            let o = order_ideal(n, &seeds);
            prop_assert!(o.is_divisor_closed());
            let b = border(&o, d);
            let oracle = brute_force_border(&o, n, d);
            prop_assert_eq!(b.terms(), oracle.as_slice());
            for u in b.iter() {
                prop_assert_eq!(u.degree(), d);
                let mut grown = o.clone();
                grown.insert(u.clone()).unwrap();
                prop_assert!(grown.is_divisor_closed());
            }
        }
    }
}
