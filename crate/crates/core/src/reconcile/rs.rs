//! Systematic Reed-Solomon codes over GF(2^m), possibly shortened.
//!
//! Codeword position `i` holds the coefficient of `x^i`; the `n - k` parity
//! symbols occupy the low positions and the message the high ones. The
//! generator has roots `α^1 .. α^(n-k)`.

use serde::{Deserialize, Serialize};

use super::gf::Gf;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RsParams {
    /// Bits per symbol.
    pub m: u32,
    /// Codeword length in symbols.
    pub n: usize,
    /// Message length in symbols.
    pub k: usize,
}

impl Default for RsParams {
    fn default() -> Self {
        Self { m: 8, n: 255, k: 223 }
    }
}

impl RsParams {
    pub fn validate(&self) -> Result<()> {
        if !(2..=super::gf::MAX_M).contains(&self.m) {
            return Err(Error::Validation(format!("RS symbol size m = {} unsupported", self.m)));
        }
        let max_n = (1usize << self.m) - 1;
        if !(1 <= self.k && self.k < self.n && self.n <= max_n) {
            return Err(Error::Validation(format!(
                "RS({}, {}) over GF(2^{}) needs 1 <= k < n <= {max_n}",
                self.n, self.k, self.m
            )));
        }
        Ok(())
    }

    /// Correctable symbol errors.
    pub fn t(&self) -> usize {
        (self.n - self.k) / 2
    }

    pub fn codeword_bits(&self) -> usize {
        self.n * self.m as usize
    }

    pub fn message_bits(&self) -> usize {
        self.k * self.m as usize
    }

    pub fn parity_bits(&self) -> usize {
        self.codeword_bits() - self.message_bits()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum DecodeFailure {
    #[error("more errors than the code can locate")]
    Uncorrectable,
}

#[derive(Debug, Clone)]
pub struct ReedSolomon {
    params: RsParams,
    gf: Gf,
    /// Low-to-high coefficients, monic, degree `n - k`.
    generator: Vec<u16>,
}

impl ReedSolomon {
    pub fn new(params: RsParams) -> Result<Self> {
        params.validate()?;
        let gf = Gf::new(params.m)?;
        let mut generator = vec![1u16];
        for j in 1..=(params.n - params.k) as i64 {
            // multiply by (x + α^j)
            let root = gf.alpha_pow(j);
            let mut next = vec![0u16; generator.len() + 1];
            for (i, &c) in generator.iter().enumerate() {
                next[i] ^= gf.mul(c, root);
                next[i + 1] ^= c;
            }
            generator = next;
        }
        Ok(Self { params, gf, generator })
    }

    pub fn params(&self) -> RsParams {
        self.params
    }

    pub fn field(&self) -> &Gf {
        &self.gf
    }

    fn check_symbols(&self, symbols: &[u16], expected: usize, what: &str) -> Result<()> {
        if symbols.len() != expected {
            return Err(Error::Contract(format!(
                "{what} has {} symbols, expected {expected}",
                symbols.len()
            )));
        }
        if let Some(s) = symbols.iter().find(|&&s| !self.gf.contains(s)) {
            return Err(Error::Contract(format!(
                "symbol {s} outside GF(2^{})",
                self.params.m
            )));
        }
        Ok(())
    }

    pub fn encode(&self, word: &[u16]) -> Result<Vec<u16>> {
        self.check_symbols(word, self.params.k, "message")?;
        let parity_len = self.params.n - self.params.k;
        // remainder of x^(n-k)·w(x) divided by the generator
        let mut rem = vec![0u16; parity_len];
        for &w in word.iter().rev() {
            let feedback = w ^ rem[parity_len - 1];
            for i in (1..parity_len).rev() {
                rem[i] = rem[i - 1] ^ self.gf.mul(feedback, self.generator[i]);
            }
            rem[0] = self.gf.mul(feedback, self.generator[0]);
        }
        let mut codeword = rem;
        codeword.extend_from_slice(word);
        Ok(codeword)
    }

    /// `r(α^j)` for `j = 1 ..= n - k`.
    pub fn syndromes(&self, received: &[u16]) -> Vec<u16> {
        (1..=(self.params.n - self.params.k) as i64)
            .map(|j| self.gf.eval(received, self.gf.alpha_pow(j)))
            .collect()
    }

    /// Bounded-distance decoding. Contract errors cover malformed input;
    /// an undecodable word is the inner `Err`.
    pub fn decode(&self, received: &[u16]) -> Result<Result<Vec<u16>, DecodeFailure>> {
        self.check_symbols(received, self.params.n, "received word")?;
        let parity_len = self.params.n - self.params.k;
        let synd = self.syndromes(received);
        if synd.iter().all(|&s| s == 0) {
            return Ok(Ok(received[parity_len..].to_vec()));
        }
        let gf = &self.gf;
        let t = self.params.t();
        let synd = &synd[..2 * t];

        let locator = berlekamp_massey(gf, synd);
        let degree = locator.len() - 1;
        if degree == 0 || degree > t {
            return Ok(Err(DecodeFailure::Uncorrectable));
        }

        // Chien search over the positions present in the (shortened) code
        let positions: Vec<usize> = (0..self.params.n)
            .filter(|&i| gf.eval(&locator, gf.alpha_pow(-(i as i64))) == 0)
            .collect();
        if positions.len() != degree {
            return Ok(Err(DecodeFailure::Uncorrectable));
        }

        // Forney: Ω = S·Λ mod x^(2t), e_i = Ω(X_i^-1) / Λ'(X_i^-1)
        let mut omega = vec![0u16; 2 * t];
        for (i, &s) in synd.iter().enumerate() {
            for (j, &l) in locator.iter().enumerate() {
                if i + j < 2 * t {
                    omega[i + j] ^= gf.mul(s, l);
                }
            }
        }
        let derivative: Vec<u16> = locator
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| if i % 2 == 1 { c } else { 0 })
            .collect();
        let mut corrected = received.to_vec();
        for &pos in &positions {
            let x_inv = gf.alpha_pow(-(pos as i64));
            let denom = gf.eval(&derivative, x_inv);
            if denom == 0 {
                return Ok(Err(DecodeFailure::Uncorrectable));
            }
            corrected[pos] ^= gf.div(gf.eval(&omega, x_inv), denom);
        }
        if self.syndromes(&corrected).iter().any(|&s| s != 0) {
            return Ok(Err(DecodeFailure::Uncorrectable));
        }
        Ok(Ok(corrected[parity_len..].to_vec()))
    }
}

/// Shortest LFSR generating the syndrome sequence; returns the error
/// locator, low-to-high, trimmed to its degree.
fn berlekamp_massey(gf: &Gf, synd: &[u16]) -> Vec<u16> {
    let mut c = vec![1u16];
    let mut b = vec![1u16];
    let mut len = 0usize;
    let mut shift = 1usize;
    let mut last = 1u16;
    for k in 0..synd.len() {
        let mut d = synd[k];
        for i in 1..=len.min(c.len() - 1) {
            d ^= gf.mul(c[i], synd[k - i]);
        }
        if d == 0 {
            shift += 1;
            continue;
        }
        let scale = gf.div(d, last);
        let prev = c.clone();
        if c.len() < b.len() + shift {
            c.resize(b.len() + shift, 0);
        }
        for (i, &bi) in b.iter().enumerate() {
            c[i + shift] ^= gf.mul(scale, bi);
        }
        if 2 * len <= k {
            len = k + 1 - len;
            b = prev;
            last = d;
            shift = 1;
        } else {
            shift += 1;
        }
    }
    c.truncate(len + 1);
    while c.len() > 1 && *c.last().unwrap() == 0 {
        c.pop();
    }
    c
}

/// Packs `bits` (MSB first) into `m`-bit symbols; the length must divide.
pub fn bits_to_symbols(bits: &[u8], m: u32) -> Vec<u16> {
    bits.chunks(m as usize)
        .map(|chunk| chunk.iter().fold(0u16, |acc, &b| (acc << 1) | b as u16))
        .collect()
}

pub fn symbols_to_bits(symbols: &[u16], m: u32) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|&s| (0..m).rev().map(move |i| ((s >> i) & 1) as u8))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rs15() -> ReedSolomon {
        ReedSolomon::new(RsParams { m: 4, n: 15, k: 11 }).unwrap()
    }

    #[test]
    fn zero_word() {
        let rs = rs15();
        assert_eq!(rs.encode(&[0; 11]).unwrap(), vec![0; 15]);
    }

    #[test]
    fn codewords_vanish_at_generator_roots() {
        let rs = rs15();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let w: Vec<u16> = (0..11).map(|_| rng.random_range(0..16)).collect();
            let c = rs.encode(&w).unwrap();
            assert_eq!(&c[4..], &w[..]);
            for j in 1..=4 {
                assert_eq!(rs.field().eval(&c, rs.field().alpha_pow(j)), 0);
            }
        }
    }

    #[test]
    fn corrects_up_to_t() {
        for params in [
            RsParams { m: 4, n: 15, k: 11 },
            RsParams { m: 8, n: 255, k: 223 },
            RsParams { m: 8, n: 40, k: 20 },
            RsParams { m: 5, n: 31, k: 16 },
            RsParams { m: 3, n: 7, k: 4 },
        ] {
            let rs = ReedSolomon::new(params).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(params.n as u64);
            let top = 1u16 << params.m;
            for trial in 0..100 {
                let w: Vec<u16> = (0..params.k).map(|_| rng.random_range(0..top)).collect();
                let mut r = rs.encode(&w).unwrap();
                let errors = trial % (params.t() + 1);
                let mut pos: Vec<usize> = (0..params.n).collect();
                for i in 0..errors {
                    let j = rng.random_range(i..params.n);
                    pos.swap(i, j);
                    r[pos[i]] ^= rng.random_range(1..top);
                }
                assert_eq!(rs.decode(&r).unwrap(), Ok(w), "{params:?} with {errors} errors");
            }
        }
    }

    #[test]
    fn too_many_errors_never_silently_pass_as_original() {
        let rs = rs15();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let w: Vec<u16> = (0..11).map(|_| rng.random_range(0..16)).collect();
            let mut r = rs.encode(&w).unwrap();
            for p in rand::seq::index::sample(&mut rng, 15, 3) {
                r[p] ^= rng.random_range(1..16);
            }
            assert_ne!(rs.decode(&r).unwrap(), Ok(w));
        }
    }

    #[test]
    fn contract_errors() {
        let rs = rs15();
        assert!(rs.encode(&[0; 10]).is_err());
        assert!(rs.encode(&[16; 11]).is_err());
        assert!(rs.decode(&[0; 14]).is_err());
        assert!(RsParams { m: 4, n: 16, k: 11 }.validate().is_err());
        assert!(RsParams { m: 4, n: 11, k: 11 }.validate().is_err());
        assert!(RsParams { m: 4, n: 11, k: 0 }.validate().is_err());
    }

    #[test]
    fn symbol_packing() {
        let bits = [1, 0, 1, 1, 0, 0, 0, 1];
        assert_eq!(bits_to_symbols(&bits, 4), vec![0b1011, 0b0001]);
        assert_eq!(symbols_to_bits(&[0b1011, 0b0001], 4), bits.to_vec());
    }
}
