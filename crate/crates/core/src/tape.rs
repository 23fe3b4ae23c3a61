//! Scalar reverse-mode automatic differentiation.
//!
//! Density code is written once against [`Real`]; evaluating it with `f64`
//! gives plain values, evaluating it with [`Var`] records every primitive on
//! a [`Tape`] whose single backward sweep yields the full gradient.

use alloc::vec::Vec;
use core::cell::RefCell;
use core::ops::{Add, Div, Mul, Neg, Sub};

use crate::special::{digamma_unchecked, inv_logit, lgamma_unchecked, softplus};

/// Scalar arithmetic shared by `f64` and tape variables.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// Whether operations are recorded for differentiation.
    const TRACKED: bool;

    fn constant(value: f64) -> Self;
    fn value(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    /// `ln(1 + e^x)`.
    fn softplus(self) -> Self;
    fn inv_logit(self) -> Self;
    fn lgamma(self) -> Self;

    fn square(self) -> Self {
        self * self
    }

    /// A primitive of `self` and `other` whose value and partial
    /// derivatives were computed elsewhere.
    fn lift2(self, other: Option<Self>, value: f64, d_self: f64, d_other: f64) -> Self;
}

impl Real for f64 {
    const TRACKED: bool = false;

    #[inline]
    fn constant(value: f64) -> Self {
        value
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> Self {
        libm::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        libm::log(self)
    }
    #[inline]
    fn softplus(self) -> Self {
        softplus(self)
    }
    #[inline]
    fn inv_logit(self) -> Self {
        inv_logit(self)
    }
    #[inline]
    fn lgamma(self) -> Self {
        lgamma_unchecked(self)
    }
    #[inline]
    fn lift2(self, _: Option<Self>, value: f64, _: f64, _: f64) -> Self {
        value
    }
}

const NO_PARENT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Node {
    parents: [u32; 2],
    partials: [f64; 2],
}

/// Linear record of primitive operations.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            nodes: RefCell::new(Vec::with_capacity(capacity)),
        }
    }

    /// Drops all recorded nodes, keeping the allocation.
    pub fn clear(&mut self) {
        self.nodes.get_mut().clear();
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A new independent variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        let index = self.push([NO_PARENT; 2], [0.0; 2]);
        Var {
            tape: Some(self),
            index,
            value,
        }
    }

    fn push(&self, parents: [u32; 2], partials: [f64; 2]) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let index = nodes.len() as u32;
        nodes.push(Node { parents, partials });
        index
    }

    /// Adjoints of every node with respect to `output`.
    pub fn adjoints(&self, output: Var<'_>) -> Vec<f64> {
        match output.index() {
            Some(i) => self.adjoints_seeded(&[(i, 1.0)]),
            None => alloc::vec![0.0; self.len()],
        }
    }

    /// Adjoints of every node for the output `sum(weight * node)` over the
    /// given `(node index, weight)` pairs.
    pub fn adjoints_seeded(&self, seeds: &[(usize, f64)]) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut adj = alloc::vec![0.0; nodes.len()];
        let mut top = 0;
        for &(i, w) in seeds {
            adj[i] += w;
            top = top.max(i + 1);
        }
        for i in (0..top).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = nodes[i];
            for slot in 0..2 {
                let p = node.parents[slot];
                if p != NO_PARENT {
                    adj[p as usize] += a * node.partials[slot];
                }
            }
        }
        adj
    }
}

/// A scalar tracked on a [`Tape`]. Constants carry no tape.
#[derive(Debug, Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    index: u32,
    value: f64,
}

impl<'t> Var<'t> {
    /// Tape slot of this variable, if it is not a constant.
    pub fn index(&self) -> Option<usize> {
        (self.index != NO_PARENT).then_some(self.index as usize)
    }

    #[inline]
    fn unary(self, value: f64, partial: f64) -> Self {
        match self.tape {
            Some(tape) => Var {
                tape: Some(tape),
                index: tape.push([self.index, NO_PARENT], [partial, 0.0]),
                value,
            },
            None => Var::constant(value),
        }
    }

    #[inline]
    fn binary(self, other: Self, value: f64, da: f64, db: f64) -> Self {
        match (self.tape, other.tape) {
            (None, None) => Var::constant(value),
            (Some(tape), None) => Var {
                tape: Some(tape),
                index: tape.push([self.index, NO_PARENT], [da, 0.0]),
                value,
            },
            (None, Some(tape)) => Var {
                tape: Some(tape),
                index: tape.push([other.index, NO_PARENT], [db, 0.0]),
                value,
            },
            (Some(tape), Some(_)) => Var {
                tape: Some(tape),
                index: tape.push([self.index, other.index], [da, db]),
                value,
            },
        }
    }
}

impl Add for Var<'_> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        self.binary(rhs, self.value + rhs.value, 1.0, 1.0)
    }
}

impl Sub for Var<'_> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, self.value - rhs.value, 1.0, -1.0)
    }
}

impl Mul for Var<'_> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        self.binary(rhs, self.value * rhs.value, rhs.value, self.value)
    }
}

impl Div for Var<'_> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let q = self.value / rhs.value;
        self.binary(rhs, q, 1.0 / rhs.value, -q / rhs.value)
    }
}

impl Neg for Var<'_> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.unary(-self.value, -1.0)
    }
}

impl Add<f64> for Var<'_> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: f64) -> Self {
        self.unary(self.value + rhs, 1.0)
    }
}

impl Sub<f64> for Var<'_> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: f64) -> Self {
        self.unary(self.value - rhs, 1.0)
    }
}

impl Mul<f64> for Var<'_> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: f64) -> Self {
        self.unary(self.value * rhs, rhs)
    }
}

impl Div<f64> for Var<'_> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        self.unary(self.value / rhs, 1.0 / rhs)
    }
}

impl Real for Var<'_> {
    const TRACKED: bool = true;

    #[inline]
    fn constant(value: f64) -> Self {
        Var {
            tape: None,
            index: NO_PARENT,
            value,
        }
    }
    #[inline]
    fn value(self) -> f64 {
        self.value
    }
    #[inline]
    fn exp(self) -> Self {
        let e = libm::exp(self.value);
        self.unary(e, e)
    }
    #[inline]
    fn ln(self) -> Self {
        self.unary(libm::log(self.value), 1.0 / self.value)
    }
    #[inline]
    fn softplus(self) -> Self {
        self.unary(softplus(self.value), inv_logit(self.value))
    }
    #[inline]
    fn inv_logit(self) -> Self {
        let p = inv_logit(self.value);
        let q = inv_logit(-self.value);
        self.unary(p, p * q)
    }
    #[inline]
    fn lgamma(self) -> Self {
        self.unary(
            lgamma_unchecked(self.value),
            digamma_unchecked(self.value),
        )
    }
    #[inline]
    fn square(self) -> Self {
        self.unary(self.value * self.value, 2.0 * self.value)
    }
    #[inline]
    fn lift2(self, other: Option<Self>, value: f64, d_self: f64, d_other: f64) -> Self {
        match other {
            Some(o) => self.binary(o, value, d_self, d_other),
            None => self.unary(value, d_self),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grad_of(f: impl for<'t> Fn(&[Var<'t>]) -> Var<'t>, x: &[f64]) -> (f64, Vec<f64>) {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = x.iter().map(|&v| tape.var(v)).collect();
        let out = f(&vars);
        let adj = tape.adjoints(out);
        let g = vars.iter().map(|v| adj[v.index().unwrap()]).collect();
        (out.value(), g)
    }

    #[test]
    fn product_rule_and_reuse() {
        // f = x*y + x^2 ; df/dx = y + 2x, df/dy = x
        let (v, g) = grad_of(|v| v[0] * v[1] + v[0].square(), &[3.0, 5.0]);
        assert_eq!(v, 24.0);
        assert_eq!(g, [11.0, 3.0]);
    }

    #[test]
    fn constants_are_not_recorded() {
        let tape = Tape::new();
        let c = Var::constant(2.0) * Var::constant(3.0) + 1.0;
        assert_eq!(c.value(), 7.0);
        assert!(tape.is_empty());
        let x = tape.var(1.5);
        let y = x * Var::constant(4.0) - 2.0;
        let adj = tape.adjoints(y);
        assert_eq!(adj[x.index().unwrap()], 4.0);
    }

    #[test]
    fn elementary_derivatives() {
        let x0 = 0.7;
        let h = 1e-6;
        let fns: [fn(Var<'_>) -> Var<'_>; 5] = [
            |x| x.exp(),
            |x| x.ln(),
            |x| x.softplus(),
            |x| x.inv_logit(),
            |x| x.lgamma(),
        ];
        let plain: [fn(f64) -> f64; 5] = [
            |x| Real::exp(x),
            |x| Real::ln(x),
            |x| Real::softplus(x),
            |x| Real::inv_logit(x),
            |x| Real::lgamma(x),
        ];
        for (f, p) in fns.iter().zip(plain.iter()) {
            let (_, g) = grad_of(|v| f(v[0]), &[x0]);
            let fd = (p(x0 + h) - p(x0 - h)) / (2.0 * h);
            assert!((g[0] - fd).abs() < 1e-8, "{} vs {}", g[0], fd);
        }
    }

    #[test]
    fn division_and_negation() {
        let (v, g) = grad_of(|v| -(v[0] / v[1]), &[1.0, 4.0]);
        assert_eq!(v, -0.25);
        assert_eq!(g, [-0.25, 1.0 / 16.0]);
    }
}
