//! Rate-adaptive LDPC code with accumulated syndromes.
//!
//! The parity-check matrix is `H = P_r (I + L) P_c` with `L` strictly lower
//! triangular, so the full syndrome determines the source by forward
//! substitution. Syndromes are accumulated (`a[i] = s[0] ^ .. ^ s[i]`) and
//! sent in a bit-reversed phase order; every prefix of whole phases defines
//! a rung whose checks are XOR merges of consecutive rows.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 0x0151_6e73;
pub const DEFAULT_STEPS: usize = 64;
pub const MAX_ITERATIONS: usize = 100;
const STALL_ITERATIONS: usize = 12;

/// Checks of one rung, in compressed sparse row form.
#[derive(Debug)]
pub struct Rung {
    /// Accumulator positions known at this rung, ascending.
    pub known: Vec<usize>,
    check_ptr: Vec<u32>,
    check_vars: Vec<u32>,
}

impl Rung {
    pub fn num_checks(&self) -> usize {
        self.known.len()
    }

    pub fn check(&self, c: usize) -> &[u32] {
        &self.check_vars[self.check_ptr[c] as usize..self.check_ptr[c + 1] as usize]
    }
}

#[derive(Debug)]
pub struct LdpcaCode {
    pub n: usize,
    pub steps: usize,
    pub seed: u64,
    /// Variables of each row of H.
    rows: Vec<Vec<u32>>,
    /// Row of `I + L` used by H row i.
    row_perm: Vec<usize>,
    /// Column of `I + L` used by variable j.
    col_perm: Vec<usize>,
    /// Strictly-lower entries of each row of `I + L`.
    lower: Vec<Vec<u32>>,
    /// Accumulator positions in transmission order.
    tx_order: Vec<usize>,
    rungs: Vec<Rung>,
}

fn bit_reverse(mut v: usize, bits: u32) -> usize {
    let mut r = 0;
    for _ in 0..bits {
        r = (r << 1) | (v & 1);
        v >>= 1;
    }
    r
}

impl LdpcaCode {
    /// Builds the code. `n` must be a multiple of `steps`, and `steps` a power of two.
    pub fn new(n: usize, steps: usize, seed: u64) -> Self {
        assert!(steps.is_power_of_two() && n % steps == 0 && n >= 8, "bad code geometry");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let band = (n / 4).max(2);
        let mut lower: Vec<Vec<u32>> = vec![Vec::new(); n];
        for c in 0..n {
            let hi = (c + band).min(n - 1);
            let avail = hi - c;
            let picks = avail.min(2);
            let mut chosen: Vec<usize> = Vec::with_capacity(2);
            while chosen.len() < picks {
                let r = rng.gen_range(c + 1..=hi);
                if !chosen.contains(&r) {
                    chosen.push(r);
                }
            }
            for r in chosen {
                lower[r].push(c as u32);
            }
        }
        for l in lower.iter_mut() {
            l.sort_unstable();
        }
        let mut row_perm: Vec<usize> = (0..n).collect();
        row_perm.shuffle(&mut rng);
        let mut col_perm: Vec<usize> = (0..n).collect();
        col_perm.shuffle(&mut rng);
        let mut inv_col = vec![0u32; n];
        for (j, &m) in col_perm.iter().enumerate() {
            inv_col[m] = j as u32;
        }
        let rows: Vec<Vec<u32>> = row_perm
            .iter()
            .map(|&m| {
                let mut v: Vec<u32> = lower[m].iter().map(|&c| inv_col[c as usize]).collect();
                v.push(inv_col[m]);
                v.sort_unstable();
                v
            })
            .collect();

        let bits = steps.trailing_zeros();
        let mut tx_order = Vec::with_capacity(n);
        for k in 0..steps {
            let phase = steps - 1 - bit_reverse(k, bits);
            tx_order.extend((phase..n).step_by(steps));
        }

        let mut code = Self { n, steps, seed, rows, row_perm, col_perm, lower, tx_order, rungs: Vec::new() };
        code.rungs = (1..=steps).map(|k| code.build_rung(k)).collect();
        code
    }

    /// Shared instance per geometry and seed.
    pub fn shared(n: usize, steps: usize, seed: u64) -> Arc<LdpcaCode> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize, u64), Arc<LdpcaCode>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut g = cache.lock().unwrap();
        g.entry((n, steps, seed)).or_insert_with(|| Arc::new(LdpcaCode::new(n, steps, seed))).clone()
    }

    fn build_rung(&self, k: usize) -> Rung {
        let mut known: Vec<usize> = self.tx_order[..k * self.n / self.steps].to_vec();
        known.sort_unstable();
        let mut toggle = vec![false; self.n];
        let mut touched: Vec<u32> = Vec::new();
        let mut check_ptr = vec![0u32];
        let mut check_vars = Vec::new();
        let mut prev = 0usize;
        for &p in &known {
            for row in &self.rows[prev..=p] {
                for &v in row {
                    if !toggle[v as usize] {
                        touched.push(v);
                    }
                    toggle[v as usize] = !toggle[v as usize];
                }
            }
            touched.sort_unstable();
            for &v in &touched {
                if toggle[v as usize] {
                    check_vars.push(v);
                    toggle[v as usize] = false;
                }
            }
            touched.clear();
            check_ptr.push(check_vars.len() as u32);
            prev = p + 1;
        }
        Rung { known, check_ptr, check_vars }
    }

    pub fn bits_per_step(&self) -> usize {
        self.n / self.steps
    }

    pub fn rung(&self, k: usize) -> &Rung {
        &self.rungs[k - 1]
    }

    /// Smallest rung carrying at least `bits` syndrome bits.
    pub fn rung_for_bits(&self, bits: usize) -> usize {
        bits.div_ceil(self.bits_per_step()).clamp(1, self.steps)
    }

    pub fn syndrome(&self, x: &[u8]) -> Vec<u8> {
        self.rows.iter().map(|r| r.iter().fold(0u8, |a, &v| a ^ x[v as usize])).collect()
    }

    /// Accumulated syndrome in transmission order; prefixes are what gets sent.
    pub fn transmission(&self, x: &[u8]) -> Vec<u8> {
        let s = self.syndrome(x);
        let mut acc = vec![0u8; self.n];
        let mut a = 0u8;
        for (i, &b) in s.iter().enumerate() {
            a ^= b;
            acc[i] = a;
        }
        self.tx_order.iter().map(|&p| acc[p]).collect()
    }

    /// Check values of rung `k` from the first `k * n / steps` transmitted bits.
    pub fn rung_checks(&self, k: usize, tx_prefix: &[u8]) -> Vec<u8> {
        let count = k * self.bits_per_step();
        let mut acc = vec![0u8; self.n];
        for (&p, &b) in self.tx_order[..count].iter().zip(tx_prefix) {
            acc[p] = b;
        }
        let rung = self.rung(k);
        let mut prev = 0u8;
        rung.known
            .iter()
            .map(|&p| {
                let v = acc[p] ^ prev;
                prev = acc[p];
                v
            })
            .collect()
    }

    /// Recovers `x` from the complete transmission by forward substitution.
    pub fn solve(&self, tx: &[u8]) -> Vec<u8> {
        assert_eq!(tx.len(), self.n);
        let mut acc = vec![0u8; self.n];
        for (&p, &b) in self.tx_order.iter().zip(tx) {
            acc[p] = b;
        }
        let mut t = vec![0u8; self.n];
        let mut prev = 0u8;
        for i in 0..self.n {
            t[self.row_perm[i]] = acc[i] ^ prev;
            prev = acc[i];
        }
        let mut z = vec![0u8; self.n];
        for r in 0..self.n {
            let mut v = t[r];
            for &c in &self.lower[r] {
                v ^= z[c as usize];
            }
            z[r] = v;
        }
        self.col_perm.iter().map(|&m| z[m]).collect()
    }

    /// Decodes from `k` rungs of transmission with side information `y`
    /// observed through a binary symmetric channel of crossover `p`.
    /// Returns the hard decision if all checks are satisfied.
    pub fn decode(&self, k: usize, tx_prefix: &[u8], y: &[u8], p: f64) -> Option<Vec<u8>> {
        if k == self.steps {
            return Some(self.solve(&tx_prefix[..self.n]));
        }
        let checks = self.rung_checks(k, tx_prefix);
        bp_decode(self.rung(k), &checks, y, p)
    }
}

impl LdpcaCode {
    /// Smallest rung at or above `k_min` whose prefix decodes `x` from `y`
    /// exactly. Starts from a guess above `k_min` and walks down while decoding
    /// succeeds, or up until it does; equals a linear scan from `k_min`
    /// whenever success is monotone in the rung.
    pub fn min_decodable_rung(&self, x: &[u8], y: &[u8], k_min: usize, tx: &[u8]) -> usize {
        let k_min = k_min.clamp(1, self.steps);
        if x == y {
            return k_min;
        }
        let works = |k: usize| -> bool {
            k == self.steps
                || self.decode(k, &tx[..k * self.bits_per_step()], y, decoder_crossover(self, k)).as_deref() == Some(x)
        };
        let h = (k_min * self.bits_per_step()) as f64 / self.n as f64;
        let guess = (k_min + (self.steps as f64 * (0.06 + 0.15 * h)).round() as usize).min(self.steps);
        if works(guess) {
            let mut k = guess;
            while k > k_min && works(k - 1) {
                k -= 1;
            }
            k
        } else {
            let mut k = guess + 1;
            while !works(k) {
                k += 1;
            }
            k
        }
    }
}

/// phi(x) = -ln(tanh(x / 2)), its own inverse on (0, inf).
struct Phi {
    table: Vec<f32>,
}

const PHI_SCALE: f32 = 512.0;
const PHI_MAX: f32 = 16.0;
const PHI_SMALL: f32 = 0.125;

impl Phi {
    fn get() -> &'static Phi {
        static T: OnceLock<Phi> = OnceLock::new();
        T.get_or_init(|| {
            let len = (PHI_MAX * PHI_SCALE) as usize;
            let table = (0..len)
                .map(|i| {
                    let x = (i as f64 + 0.5) / PHI_SCALE as f64;
                    (-(x / 2.0).tanh().ln()) as f32
                })
                .collect();
            Phi { table }
        })
    }

    #[inline]
    fn eval(&self, x: f32) -> f32 {
        if x < PHI_SMALL {
            let x = x.max(1e-7);
            -(x * 0.5).ln() + x * x / 12.0
        } else if x >= PHI_MAX {
            0.0
        } else {
            self.table[(x * PHI_SCALE) as usize]
        }
    }
}

const LLR_CAP: f32 = 40.0;

/// Layered sum-product decoding in the log domain.
fn bp_decode(rung: &Rung, checks: &[u8], y: &[u8], p: f64) -> Option<Vec<u8>> {
    let n = y.len();
    let phi = Phi::get();
    let p = p.clamp(1e-6, 0.5 - 1e-6);
    let l0 = ((1.0 - p) / p).ln() as f32;
    let mut post: Vec<f32> = y.iter().map(|&b| if b == 0 { l0 } else { -l0 }).collect();
    let edges = rung.check_vars.len();
    let mut msg = vec![0f32; edges];
    let mut hard: Vec<u8> = y.to_vec();

    let unsatisfied = |hard: &[u8]| -> usize {
        (0..rung.num_checks())
            .filter(|&c| rung.check(c).iter().fold(checks[c], |a, &v| a ^ hard[v as usize]) != 0)
            .count()
    };
    let mut best = unsatisfied(&hard);
    if best == 0 {
        return Some(hard);
    }
    let mut stall = 0;
    let mut ext: Vec<f32> = Vec::with_capacity(64);
    for _ in 0..MAX_ITERATIONS {
        for c in 0..rung.num_checks() {
            let (s, e) = (rung.check_ptr[c] as usize, rung.check_ptr[c + 1] as usize);
            let vars = &rung.check_vars[s..e];
            ext.clear();
            let mut sum = 0f32;
            let mut neg = checks[c] != 0;
            for (i, &v) in vars.iter().enumerate() {
                let m = post[v as usize] - msg[s + i];
                ext.push(m);
                sum += phi.eval(m.abs());
                neg ^= m < 0.0;
            }
            for (i, &v) in vars.iter().enumerate() {
                let m = ext[i];
                let mag = phi.eval((sum - phi.eval(m.abs())).max(0.0)).min(LLR_CAP);
                let out = if neg ^ (m < 0.0) { -mag } else { mag };
                msg[s + i] = out;
                post[v as usize] = (m + out).clamp(-LLR_CAP * 4.0, LLR_CAP * 4.0);
            }
        }
        for (h, &l) in hard.iter_mut().zip(&post) {
            *h = (l < 0.0) as u8;
        }
        let u = unsatisfied(&hard);
        if u == 0 {
            return Some(hard);
        }
        if u < best {
            best = u;
            stall = 0;
        } else {
            stall += 1;
            if stall >= STALL_ITERATIONS {
                break;
            }
        }
    }
    debug_assert_eq!(hard.len(), n);
    None
}

/// Binary entropy in bits.
pub fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// Inverse of [`h2`] on [0, 0.5].
pub fn h2_inverse(h: f64) -> f64 {
    if h <= 0.0 {
        return 0.0;
    }
    if h >= 1.0 {
        return 0.5;
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if h2(mid) < h {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Crossover assumed by the decoder at rung `k`; derived from the rate alone
/// so it never needs to be transmitted.
pub fn decoder_crossover(code: &LdpcaCode, k: usize) -> f64 {
    let rate = (k * code.bits_per_step()) as f64 / code.n as f64;
    (h2_inverse(rate) * CROSSOVER_BACKOFF).max(0.5 / code.n as f64)
}

const CROSSOVER_BACKOFF: f64 = 0.75;

#[cfg(test)]
mod tests {
    use super::*;

    fn random_bits(n: usize, rng: &mut ChaCha8Rng, p: f64) -> Vec<u8> {
        (0..n).map(|_| rng.gen_bool(p) as u8).collect()
    }

    #[test]
    fn rungs_are_nested_and_sized() {
        let code = LdpcaCode::new(1024, 64, 7);
        for k in 1..=64 {
            let r = code.rung(k);
            assert_eq!(r.num_checks(), 16 * k);
            assert_eq!(*r.known.last().unwrap(), 1023);
            if k > 1 {
                let prev = &code.rung(k - 1).known;
                assert!(prev.iter().all(|p| r.known.binary_search(p).is_ok()));
            }
        }
    }

    #[test]
    fn full_transmission_solves() {
        let code = LdpcaCode::new(1024, 64, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x = random_bits(1024, &mut rng, 0.5);
            assert_eq!(code.solve(&code.transmission(&x)), x);
        }
    }

    #[test]
    fn rung_checks_match_merged_rows() {
        let code = LdpcaCode::new(256, 16, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_bits(256, &mut rng, 0.5);
        let tx = code.transmission(&x);
        for k in 1..=16 {
            let checks = code.rung_checks(k, &tx);
            let r = code.rung(k);
            for c in 0..r.num_checks() {
                let v = r.check(c).iter().fold(0u8, |a, &j| a ^ x[j as usize]);
                assert_eq!(v, checks[c]);
            }
        }
    }

    #[test]
    fn bp_corrects_noisy_side_information() {
        let code = LdpcaCode::new(1024, 64, DEFAULT_SEED);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut ok = 0;
        for _ in 0..10 {
            let x = random_bits(1024, &mut rng, 0.5);
            let noise = random_bits(1024, &mut rng, 0.03);
            let y: Vec<u8> = x.iter().zip(&noise).map(|(a, b)| a ^ b).collect();
            // H2(0.03) = 0.194; allow a generous rung above the entropy
            let k = 30;
            let tx = code.transmission(&x);
            if code.decode(k, &tx[..k * 16], &y, decoder_crossover(&code, k)) == Some(x) {
                ok += 1;
            }
        }
        assert!(ok >= 9, "only {ok}/10 decoded");
    }

    #[test]
    fn entropy_helpers() {
        assert!((h2(0.11) - 0.4999).abs() < 1e-3);
        assert!((h2_inverse(h2(0.2)) - 0.2).abs() < 1e-12);
        assert_eq!(h2(0.0), 0.0);
    }
}
