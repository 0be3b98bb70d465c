//! Clifford groups for shadow ensembles.
//!
//! Two routes are provided. For one and two qubits the group (modulo global
//! phase) is enumerated explicitly by closing {H, S, CNOT} under
//! multiplication: 24 and 11520 elements. For larger registers a uniformly
//! random symplectic matrix is drawn with the transvection construction of
//! Koenig and Smolin and combined with random stabilizer signs; the
//! measurement basis U|j⟩ is then recovered from the images of X_k and Z_k.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{pauli, ComplexMatrix, C64, ONE, ZERO};

/// Order of the n-qubit Clifford group modulo phases, for n = 1, 2.
pub const CLIFFORD_GROUP_ORDER: [usize; 2] = [24, 11520];

fn cnot() -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(1, 1)] = ONE;
    m[(2, 3)] = ONE;
    m[(3, 2)] = ONE;
    m
}

/// Hash key of a unitary modulo global phase.
fn phase_key(u: &ComplexMatrix) -> Vec<(i64, i64)> {
    let pivot = u
        .as_slice()
        .iter()
        .find(|z| z.norm() > 1e-6)
        .copied()
        .expect("unitary has a nonzero entry");
    let phase = pivot.conj() / pivot.norm();
    u.as_slice()
        .iter()
        .map(|z| {
            let w = z * phase;
            ((w.re * 1e6).round() as i64, (w.im * 1e6).round() as i64)
        })
        .collect()
}

fn enumerate_group(generators: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
    let n = generators[0].rows();
    let id = ComplexMatrix::identity(n);
    let mut seen: HashMap<Vec<(i64, i64)>, usize> = HashMap::new();
    let mut elements = vec![id.clone()];
    seen.insert(phase_key(&id), 0);
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for g in generators {
            let next = g * &elements[i];
            let key = phase_key(&next);
            if !seen.contains_key(&key) {
                seen.insert(key, elements.len());
                queue.push_back(elements.len());
                elements.push(next);
            }
        }
    }
    elements
}

/// The Clifford group on `qubits` ∈ {1, 2}, in a fixed breadth-first order.
pub fn clifford_group(qubits: usize) -> Result<&'static [ComplexMatrix]> {
    static ONE_QUBIT: OnceLock<Vec<ComplexMatrix>> = OnceLock::new();
    static TWO_QUBIT: OnceLock<Vec<ComplexMatrix>> = OnceLock::new();
    match qubits {
        1 => Ok(ONE_QUBIT.get_or_init(|| enumerate_group(&[pauli::hadamard(), pauli::phase_s()]))),
        2 => Ok(TWO_QUBIT.get_or_init(|| {
            let h = pauli::hadamard();
            let s = pauli::phase_s();
            let i2 = ComplexMatrix::identity(2);
            enumerate_group(&[h.kron(&i2), i2.kron(&h), s.kron(&i2), i2.kron(&s), cnot()])
        })),
        _ => Err(Error::Unsupported(format!(
            "exact Clifford enumeration is limited to 1-2 qubits, got {qubits}"
        ))),
    }
}

/// Binary symplectic vector in the interleaved order (x_1, z_1, x_2, z_2, ...).
type BitVec = Vec<u8>;

fn inner(v: &[u8], w: &[u8]) -> u8 {
    let mut t = 0;
    for i in 0..v.len() / 2 {
        t ^= v[2 * i] & w[2 * i + 1];
        t ^= w[2 * i] & v[2 * i + 1];
    }
    t
}

fn transvection(k: &[u8], v: &[u8]) -> BitVec {
    if inner(k, v) == 1 {
        v.iter().zip(k).map(|(a, b)| a ^ b).collect()
    } else {
        v.to_vec()
    }
}

fn xor(a: &[u8], b: &[u8]) -> BitVec {
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

/// (h1, h2) with y = Z_h1 Z_h2 x, for nonzero x and y.
fn find_transvection(x: &[u8], y: &[u8]) -> (BitVec, BitVec) {
    let len = x.len();
    let zero = vec![0u8; len];
    if x == y {
        return (zero.clone(), zero);
    }
    if inner(x, y) == 1 {
        return (xor(x, y), zero);
    }
    let mut z = vec![0u8; len];
    for i in 0..len / 2 {
        let ii = 2 * i;
        if (x[ii] | x[ii + 1]) != 0 && (y[ii] | y[ii + 1]) != 0 {
            z[ii] = x[ii] ^ y[ii];
            z[ii + 1] = x[ii + 1] ^ y[ii + 1];
            if (z[ii] | z[ii + 1]) == 0 {
                z[ii + 1] = 1;
                if x[ii] != x[ii + 1] {
                    z[ii] = 1;
                }
            }
            return (xor(x, &z), xor(y, &z));
        }
    }
    for i in 0..len / 2 {
        let ii = 2 * i;
        if (x[ii] | x[ii + 1]) != 0 && (y[ii] | y[ii + 1]) == 0 {
            if x[ii] == x[ii + 1] {
                z[ii + 1] = 1;
            } else {
                z[ii + 1] = x[ii];
                z[ii] = x[ii + 1];
            }
            break;
        }
    }
    for i in 0..len / 2 {
        let ii = 2 * i;
        if (x[ii] | x[ii + 1]) == 0 && (y[ii] | y[ii + 1]) != 0 {
            if y[ii] == y[ii + 1] {
                z[ii + 1] = 1;
            } else {
                z[ii + 1] = y[ii];
                z[ii] = y[ii + 1];
            }
            break;
        }
    }
    (xor(x, &z), xor(y, &z))
}

/// Uniformly random element of Sp(2n, F2). Row 2k is the image of x_k and
/// row 2k+1 the image of z_k.
pub fn random_symplectic<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<BitVec> {
    let nn = 2 * n;
    // f1: uniform nonzero vector.
    let f1_int: u64 = rng.gen_range(1..(1u64 << nn));
    let mut f1: BitVec = (0..nn).map(|j| ((f1_int >> j) & 1) as u8).collect();
    let mut e1 = vec![0u8; nn];
    e1[0] = 1;
    let (t0, t1) = find_transvection(&e1, &f1);
    let bits: BitVec = (0..nn - 1).map(|_| rng.gen_range(0..2u8)).collect();
    let mut eprime = e1.clone();
    eprime[2..nn].copy_from_slice(&bits[1..(nn - 1)]);
    let h0 = transvection(&t1, &transvection(&t0, &eprime));
    if bits[0] == 1 {
        f1.iter_mut().for_each(|b| *b = 0);
    }
    let mut g: Vec<BitVec> = vec![vec![0u8; nn]; nn];
    g[0][0] = 1;
    g[1][1] = 1;
    if n > 1 {
        let sub = random_symplectic(n - 1, rng);
        for (r, row) in sub.iter().enumerate() {
            g[r + 2][2..].copy_from_slice(row);
        }
    }
    for row in g.iter_mut() {
        let mut v = transvection(&t0, row);
        v = transvection(&t1, &v);
        v = transvection(&h0, &v);
        v = transvection(&f1, &v);
        *row = v;
    }
    g
}

pub fn is_symplectic(g: &[BitVec]) -> bool {
    let nn = g.len();
    (0..nn).all(|a| {
        (0..nn).all(|b| {
            let want = u8::from(a / 2 == b / 2 && a != b);
            inner(&g[a], &g[b]) == want
        })
    })
}

/// A Hermitian Pauli string with a ±1 sign. Per-qubit letters are I, X, Y, Z
/// with Y used for x = z = 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedPauli {
    pub negative: bool,
    /// Codes 0..4 for I, X, Y, Z, qubit 0 first.
    pub letters: Vec<u8>,
}

impl SignedPauli {
    fn from_bits(bits: &[u8], negative: bool) -> Self {
        let letters = bits
            .chunks(2)
            .map(|c| match (c[0], c[1]) {
                (0, 0) => 0,
                (1, 0) => 1,
                (1, 1) => 2,
                (0, 1) => 3,
                _ => unreachable!(),
            })
            .collect();
        Self { negative, letters }
    }

    pub fn qubits(&self) -> usize {
        self.letters.len()
    }

    /// Applies the Pauli (with sign) to a state vector, qubit 0 most significant.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let n = self.letters.len();
        let mut out = vec![ZERO; v.len()];
        for (idx, amp) in v.iter().enumerate() {
            let mut target = idx;
            let mut phase = if self.negative { -ONE } else { ONE };
            for (q, &code) in self.letters.iter().enumerate() {
                let bit = (idx >> (n - 1 - q)) & 1;
                match code {
                    0 => {}
                    1 => target ^= 1 << (n - 1 - q),
                    2 => {
                        target ^= 1 << (n - 1 - q);
                        // Y|0⟩ = i|1⟩, Y|1⟩ = −i|0⟩
                        phase *= if bit == 0 { C64::new(0.0, 1.0) } else { C64::new(0.0, -1.0) };
                    }
                    3 => {
                        if bit == 1 {
                            phase = -phase;
                        }
                    }
                    _ => unreachable!(),
                }
            }
            out[target] += phase * amp;
        }
        out
    }

    pub fn matrix(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::identity(1);
        for &c in &self.letters {
            m = m.kron(pauli::by_code(c).matrix());
        }
        if self.negative {
            m.scale_real(-1.0)
        } else {
            m
        }
    }
}

impl fmt::Display for SignedPauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", if self.negative { '-' } else { '+' })?;
        for &c in &self.letters {
            write!(f, "{}", ['I', 'X', 'Y', 'Z'][c as usize])?;
        }
        Ok(())
    }
}

impl FromStr for SignedPauli {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.chars();
        let negative = match chars.next() {
            Some('+') => false,
            Some('-') => true,
            _ => return Err(Error::Format(format!("Pauli string {s:?} lacks a sign"))),
        };
        let letters = chars
            .map(|c| match c {
                'I' => Ok(0),
                'X' => Ok(1),
                'Y' => Ok(2),
                'Z' => Ok(3),
                _ => Err(Error::Format(format!("bad Pauli letter {c:?} in {s:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        if letters.is_empty() {
            return Err(Error::Format("empty Pauli string".into()));
        }
        Ok(Self { negative, letters })
    }
}

/// Stabilizer and destabilizer generators of a sampled Clifford: the basis
/// vector U|j⟩ is the joint eigenvector of the stabilizers with eigenvalue
/// (−1)^{j_k} on generator k (qubit 0 is the most significant bit of j).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StabilizerFrame {
    pub stabilizers: Vec<SignedPauli>,
    pub destabilizers: Vec<SignedPauli>,
}

impl StabilizerFrame {
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let g = random_symplectic(n, rng);
        let stabilizers = (0..n).map(|k| SignedPauli::from_bits(&g[2 * k + 1], rng.gen())).collect();
        let destabilizers = (0..n).map(|k| SignedPauli::from_bits(&g[2 * k], false)).collect();
        Self { stabilizers, destabilizers }
    }

    /// Rebuilds a frame from stabilizers alone by searching for destabilizers.
    pub fn from_stabilizers(stabilizers: Vec<SignedPauli>) -> Result<Self> {
        let n = stabilizers.len();
        if n == 0 || stabilizers.iter().any(|s| s.qubits() != n) {
            return Err(Error::Format("need n stabilizers on n qubits".into()));
        }
        let to_bits = |p: &SignedPauli| -> BitVec {
            p.letters
                .iter()
                .flat_map(|&c| match c {
                    0 => [0, 0],
                    1 => [1, 0],
                    2 => [1, 1],
                    _ => [0, 1],
                })
                .collect()
        };
        let sbits: Vec<BitVec> = stabilizers.iter().map(to_bits).collect();
        for a in 0..n {
            for b in 0..n {
                if inner(&sbits[a], &sbits[b]) != 0 {
                    return Err(Error::Format("stabilizers do not commute".into()));
                }
            }
        }
        // Destabilizer k: anticommutes with stabilizer k only. Found by brute
        // force over the 4^n Paulis; n ≤ 6 keeps this at 4096 candidates.
        let mut destabilizers = Vec::with_capacity(n);
        for k in 0..n {
            let found = (1u64..(1 << (2 * n))).find_map(|code| {
                let bits: BitVec = (0..2 * n).map(|j| ((code >> j) & 1) as u8).collect();
                let ok = (0..n).all(|l| inner(&bits, &sbits[l]) == u8::from(l == k));
                ok.then(|| SignedPauli::from_bits(&bits, false))
            });
            destabilizers.push(found.ok_or_else(|| Error::Format("stabilizers are not independent".into()))?);
        }
        Ok(Self { stabilizers, destabilizers })
    }

    pub fn qubits(&self) -> usize {
        self.stabilizers.len()
    }

    /// All basis vectors U|j⟩, j = 0..2^n, each up to a global phase.
    pub fn basis_vectors(&self) -> Vec<Vec<C64>> {
        let n = self.qubits();
        let dim = 1usize << n;
        // Project computational basis vectors onto the j = 0 joint eigenspace
        // until one survives.
        let project = |v: Vec<C64>| -> Vec<C64> {
            self.stabilizers.iter().fold(v, |acc, s| {
                let sv = s.apply(&acc);
                acc.iter().zip(&sv).map(|(a, b)| (a + b) * 0.5).collect()
            })
        };
        let u0 = (0..dim)
            .map(|i| {
                let mut e = vec![ZERO; dim];
                e[i] = ONE;
                project(e)
            })
            .find(|v| v.iter().map(|z| z.norm_sqr()).sum::<f64>() > 1e-6)
            .expect("stabilizer projector has rank one");
        let norm = u0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let u0: Vec<C64> = u0.into_iter().map(|z| z / norm).collect();
        (0..dim)
            .map(|j| {
                let mut v = u0.clone();
                for k in 0..n {
                    if (j >> (n - 1 - k)) & 1 == 1 {
                        v = self.destabilizers[k].apply(&v);
                    }
                }
                v
            })
            .collect()
    }
}

impl fmt::Display for StabilizerFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.stabilizers.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join(","))
    }
}
