//! Regenerates `data/short_base_sequences.txt`.
//!
//! For each short length a seeded local search over QPSK phase vectors
//! (phi in {-3,-1,1,3}, value e^{j pi phi/4}) keeps rows whose
//! oversampled PAPR is below the target. Output goes to stdout:
//!
//!     cargo run --example gen_base_table > crates/core/data/short_base_sequences.txt

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srs_sense::waveform::{papr_db, TABLE_GROUPS};

const LENGTHS: [usize; 4] = [6, 12, 18, 24];
const PHASES: [i8; 4] = [-3, -1, 1, 3];
const OVERSAMPLE: usize = 16;
const TARGET_DB: f64 = 2.8;

fn seq(phi: &[i8]) -> Vec<C64> {
    phi.iter()
        .map(|&p| C64::from_polar(1.0, std::f64::consts::PI * f64::from(p) / 4.0))
        .collect()
}

fn papr(phi: &[i8]) -> f64 {
    papr_db(&seq(phi), OVERSAMPLE)
}

/// Max normalized cross-correlation magnitude between two rows (zero lag,
/// all relative cyclic shifts w of the second one).
fn xcorr(a: &[i8], b: &[i8]) -> f64 {
    let (sa, sb) = (seq(a), seq(b));
    let m = sa.len() as f64;
    (0..8)
        .map(|w| {
            sa.iter()
                .zip(&sb)
                .enumerate()
                .map(|(k, (x, y))| x * y.conj() * C64::from_polar(1.0, std::f64::consts::PI * (w * k) as f64 / 4.0))
                .sum::<C64>()
                .norm()
                / m
        })
        .fold(0.0, f64::max)
}

fn search(m: usize, rng: &mut ChaCha8Rng) -> Vec<i8> {
    loop {
        let mut phi: Vec<i8> = (0..m).map(|_| PHASES[rng.random_range(0..4)]).collect();
        let mut best = papr(&phi);
        let mut improved = true;
        while improved {
            improved = false;
            for i in 0..m {
                let old = phi[i];
                for &p in &PHASES {
                    if p == old {
                        continue;
                    }
                    phi[i] = p;
                    let v = papr(&phi);
                    if v + 1e-12 < best {
                        best = v;
                        improved = true;
                    } else {
                        phi[i] = old;
                    }
                    if phi[i] != old {
                        break;
                    }
                }
            }
        }
        if best < TARGET_DB {
            return phi;
        }
    }
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e5);
    println!("# short SRS base sequences, generated by examples/gen_base_table.rs");
    println!("# format: <length> <group> <phi_0> ... <phi_(length-1)>; value = exp(j*pi*phi/4)");
    println!("# selection: PAPR < {TARGET_DB} dB at {OVERSAMPLE}x oversampling, distinct rows");
    for m in LENGTHS {
        let mut rows: Vec<Vec<i8>> = Vec::new();
        let xmax = if m <= 6 { 1.0 } else { 0.75 };
        while rows.len() < TABLE_GROUPS {
            let cand = search(m, &mut rng);
            // rows must be distinct up to a common phase and cyclic shift
            if rows.iter().all(|r| xcorr(r, &cand) < xmax - 1e-9 || (m <= 6 && r != &cand)) {
                rows.push(cand);
            }
        }
        for (g, r) in rows.iter().enumerate() {
            let body: Vec<String> = r.iter().map(|p| p.to_string()).collect();
            println!("{m} {g} {}", body.join(" "));
        }
    }
}
