//! Fuzzy commitment over a Reed-Solomon code and key confirmation.
//!
//! Alice publishes `δ = S_a ⊕ enc(y)` for a random word `y` together with
//! `H(y)`. Bob decodes `S_b ⊕ δ`; when his bitstream is close enough to
//! Alice's he recovers `y`, checks the digest and rebuilds `S_a`.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::rs::{bits_to_symbols, symbols_to_bits, ReedSolomon, RsParams};
use crate::bitio::{pack_bits, unpack_bits};
use crate::error::{Error, Result};

pub type Digest32 = [u8; 32];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Commitment {
    /// `n·m` bits, one per byte.
    pub delta: Vec<u8>,
    pub verifier_digest: Digest32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ReconcileFailure {
    #[error("decoding failed")]
    Decode,
    #[error("digest of the decoded word does not match the commitment")]
    DigestMismatch,
}

fn word_digest(word: &[u16]) -> Digest32 {
    let mut h = Sha256::new();
    for s in word {
        h.update(s.to_le_bytes());
    }
    h.finalize().into()
}

fn xor(a: &[u8], b: &[u8]) -> Vec<u8> {
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

fn check_len(bits: &[u8], params: RsParams) -> Result<()> {
    if bits.len() != params.codeword_bits() {
        return Err(Error::Contract(format!(
            "bitstream block has {} bits, the code needs exactly {}",
            bits.len(),
            params.codeword_bits()
        )));
    }
    Ok(())
}

/// Commits to one `n·m`-bit block; returns the commitment and the private word.
pub fn commit<R: Rng + ?Sized>(s_a: &[u8], rs: &ReedSolomon, rng: &mut R) -> Result<(Commitment, Vec<u16>)> {
    let params = rs.params();
    check_len(s_a, params)?;
    let top = 1u16 << params.m;
    let y: Vec<u16> = (0..params.k).map(|_| rng.random_range(0..top)).collect();
    let c = symbols_to_bits(&rs.encode(&y)?, params.m);
    Ok((
        Commitment {
            delta: xor(s_a, &c),
            verifier_digest: word_digest(&y),
        },
        y,
    ))
}

/// Recovers Alice's block from Bob's; the outer error is for malformed input.
pub fn open(s_b: &[u8], commitment: &Commitment, rs: &ReedSolomon) -> Result<Result<Vec<u8>, ReconcileFailure>> {
    let params = rs.params();
    check_len(s_b, params)?;
    check_len(&commitment.delta, params)?;
    let received = bits_to_symbols(&xor(s_b, &commitment.delta), params.m);
    let y = match rs.decode(&received)? {
        Ok(y) => y,
        Err(_) => return Ok(Err(ReconcileFailure::Decode)),
    };
    if word_digest(&y) != commitment.verifier_digest {
        return Ok(Err(ReconcileFailure::DigestMismatch));
    }
    let c = symbols_to_bits(&rs.encode(&y)?, params.m);
    Ok(Ok(xor(&c, &commitment.delta)))
}

/// `H(key ‖ nonce)`.
pub fn challenge_response(key: &[u8], nonce: &[u8]) -> Digest32 {
    let mut h = Sha256::new();
    h.update(key);
    h.update(nonce);
    h.finalize().into()
}

/// Alice sends a fresh nonce; Bob answers with `H(key_b ‖ nonce)`.
pub fn verify_keys<R: Rng + ?Sized>(key_alice: &[u8], key_bob: &[u8], rng: &mut R) -> bool {
    let mut nonce = [0u8; 16];
    rng.fill(&mut nonce);
    challenge_response(key_bob, &nonce) == challenge_response(key_alice, &nonce)
}

pub fn derive_key(bits: &[u8]) -> Digest32 {
    Sha256::digest(bits).into()
}

/// Outcome of reconciling two bitstreams block by block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconciliation {
    pub params: RsParams,
    pub blocks: usize,
    pub failed_blocks: Vec<usize>,
    /// Alice's bits of the successfully opened blocks, as rebuilt by Bob.
    pub recovered: Vec<u8>,
    /// Alice's bits of the same blocks.
    pub alice_bits: Vec<u8>,
    pub verified: bool,
    /// Alice's public commitments, one per block.
    #[serde(skip)]
    pub commitments: Vec<Commitment>,
}

impl Reconciliation {
    pub fn reconciled_bits(&self) -> usize {
        self.recovered.len()
    }

    /// Parity overhead of the opened blocks.
    pub fn parity_bits(&self) -> usize {
        (self.blocks - self.failed_blocks.len()) * self.params.parity_bits()
    }
}

/// Splits both bitstreams into `n·m`-bit blocks (dropping the partial tail),
/// commits on Alice's side and opens on Bob's, then confirms the derived keys.
pub fn reconcile<R: Rng + ?Sized>(s_a: &[u8], s_b: &[u8], rs: &ReedSolomon, rng: &mut R) -> Result<Reconciliation> {
    if s_a.len() != s_b.len() {
        return Err(Error::Contract(format!(
            "bitstreams differ in length: {} vs {}",
            s_a.len(),
            s_b.len()
        )));
    }
    let params = rs.params();
    let block = params.codeword_bits();
    let blocks = s_a.len() / block;
    let mut out = Reconciliation {
        params,
        blocks,
        failed_blocks: Vec::new(),
        recovered: Vec::new(),
        alice_bits: Vec::new(),
        verified: false,
        commitments: Vec::with_capacity(blocks),
    };
    for b in 0..blocks {
        let range = b * block..(b + 1) * block;
        let (c, _) = commit(&s_a[range.clone()], rs, rng)?;
        match open(&s_b[range.clone()], &c, rs)? {
            Ok(bits) => {
                out.recovered.extend_from_slice(&bits);
                out.alice_bits.extend_from_slice(&s_a[range]);
            }
            Err(_) => out.failed_blocks.push(b),
        }
        out.commitments.push(c);
    }
    out.verified = verify_keys(&derive_key(&out.alice_bits), &derive_key(&out.recovered), rng);
    Ok(out)
}

const MAGIC: &[u8; 4] = b"FCM1";

/// Serializes commitments as: magic, `m`, `n`, `k` (u32 LE), block count
/// (u32 LE), then per block the δ bit length (u64 LE), the packed δ bytes,
/// the digest length (u32 LE) and the digest.
pub fn write_commitments<W: Write>(mut out: W, params: RsParams, blocks: &[Commitment]) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    for v in [params.m, params.n as u32, params.k as u32, blocks.len() as u32] {
        out.write_all(&v.to_le_bytes())?;
    }
    for c in blocks {
        out.write_all(&(c.delta.len() as u64).to_le_bytes())?;
        out.write_all(&pack_bits(&c.delta))?;
        out.write_all(&(c.verifier_digest.len() as u32).to_le_bytes())?;
        out.write_all(&c.verifier_digest)?;
    }
    out.flush()
}

pub fn read_commitments<Rd: Read>(mut input: Rd, path: &Path) -> Result<(RsParams, Vec<Commitment>)> {
    let bad = |msg: &str| Error::Validation(format!("{}: {msg}", path.display()));
    let mut buf = Vec::new();
    input.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?;
    let mut cur = buf.as_slice();
    let mut take = |n: usize| -> Result<&[u8]> {
        if cur.len() < n {
            return Err(bad("truncated commitment file"));
        }
        let (head, rest) = cur.split_at(n);
        cur = rest;
        Ok(head)
    };
    if take(4)? != MAGIC {
        return Err(bad("not a commitment file"));
    }
    let mut word = || -> Result<u32> { Ok(u32::from_le_bytes(take(4)?.try_into().unwrap())) };
    let (m, n, k, count) = (word()?, word()? as usize, word()? as usize, word()?);
    let params = RsParams { m, n, k };
    params.validate()?;
    let mut blocks = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        if len != params.codeword_bits() {
            return Err(bad("delta length disagrees with the code parameters"));
        }
        let delta = unpack_bits(take(len.div_ceil(8))?, len);
        let dlen = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        if dlen != 32 {
            return Err(bad("unsupported digest length"));
        }
        let verifier_digest: Digest32 = take(32)?.try_into().unwrap();
        blocks.push(Commitment { delta, verifier_digest });
    }
    if !cur.is_empty() {
        return Err(bad("trailing bytes after the last block"));
    }
    Ok((params, blocks))
}
