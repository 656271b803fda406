//! Arithmetic in GF(2^m) via log/antilog tables.

use crate::error::{Error, Result};

/// Primitive polynomials, indexed by `m`, with the x^m term included.
const PRIMITIVE: [u32; 13] = [
    0, 0, 0x7, 0xB, 0x13, 0x25, 0x43, 0x89, 0x11D, 0x211, 0x409, 0x805, 0x1053,
];

pub const MAX_M: u32 = 12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gf {
    m: u32,
    order: usize,
    exp: Vec<u16>,
    log: Vec<u16>,
}

impl Gf {
    pub fn new(m: u32) -> Result<Self> {
        if !(2..=MAX_M).contains(&m) {
            return Err(Error::Validation(format!(
                "symbol size m = {m} unsupported; must lie in 2..={MAX_M}"
            )));
        }
        let size = 1usize << m;
        let order = size - 1;
        let poly = PRIMITIVE[m as usize];
        // exp is doubled so products of two logs index without reduction
        let mut exp = vec![0u16; 2 * order];
        let mut log = vec![0u16; size];
        let mut x: u32 = 1;
        for i in 0..order {
            exp[i] = x as u16;
            log[x as usize] = i as u16;
            x <<= 1;
            if x & size as u32 != 0 {
                x ^= poly;
            }
        }
        for i in order..2 * order {
            exp[i] = exp[i - order];
        }
        Ok(Self { m, order, exp, log })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Number of nonzero elements, `2^m - 1`.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn contains(&self, a: u16) -> bool {
        (a as usize) <= self.order
    }

    pub fn mul(&self, a: u16, b: u16) -> u16 {
        if a == 0 || b == 0 {
            0
        } else {
            self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
        }
    }

    /// Panics when `b` is zero.
    pub fn div(&self, a: u16, b: u16) -> u16 {
        assert!(b != 0, "division by zero in GF(2^{})", self.m);
        if a == 0 {
            0
        } else {
            self.exp[self.log[a as usize] as usize + self.order - self.log[b as usize] as usize]
        }
    }

    pub fn inv(&self, a: u16) -> u16 {
        self.div(1, a)
    }

    /// `α^e` for any integer exponent.
    pub fn alpha_pow(&self, e: i64) -> u16 {
        self.exp[e.rem_euclid(self.order as i64) as usize]
    }

    /// Evaluates a polynomial given low-to-high coefficients.
    pub fn eval(&self, poly: &[u16], x: u16) -> u16 {
        poly.iter().rev().fold(0, |acc, &c| self.mul(acc, x) ^ c)
    }
}
