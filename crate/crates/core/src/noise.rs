//! The per-path noise bundle: `3N + 4` standard normal variates.
//!
//! Layout. Each family lives on its own ChaCha20 stream keyed by
//! `seed_from_u64(seed)`, with stream ids
//!
//! | family | stream id |
//! |--------|-----------|
//! | `l1`   | 1         |
//! | `l2`   | 2         |
//! | `l3`   | 3         |
//! | `lstar`| 4         |
//!
//! Variate `n` of a family is `Φ⁻¹(u_n)`, where `u_n` is built from the
//! `n`-th 64-bit output of that stream as `((x >> 11) + 1/2) 2⁻⁵³` and
//! `Φ⁻¹` is Wichura's AS241 rational approximation. That approximation uses
//! only `libm`'s portable `log` and `sqrt`, so a given `(seed, n)` produces
//! the same bits on every IEEE-754 platform. Because variate `n` depends
//! only on `(seed, family, n)`, growing `N` never moves an existing variate.
//!
//! Binary file (all little-endian):
//!
//! ```text
//! magic   8 bytes   "HFBMNOIS"
//! version u32       1
//! seed    u64
//! N       u64
//! l1      (N+1) x f64
//! l2      (N+1) x f64
//! l3      (N+1) x f64
//! lstar   f64
//! ```

use std::io::{Read, Write};

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

pub const BUNDLE_MAGIC: &[u8; 8] = b"HFBMNOIS";
pub const BUNDLE_VERSION: u32 = 1;

const STREAM_L1: u64 = 1;
const STREAM_L2: u64 = 2;
const STREAM_L3: u64 = 3;
const STREAM_STAR: u64 = 4;

/// Immutable noise for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBundle {
    seed: u64,
    l1: Vec<f64>,
    l2: Vec<f64>,
    l3: Vec<f64>,
    lstar: f64,
}

fn family_stream(seed: u64, stream: u64, skip: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    // one u64 per variate = two 32-bit words
    rng.set_word_pos(2 * skip as u128);
    rng
}

fn uniform_open(x: u64) -> f64 {
    ((x >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn draw_family(seed: u64, stream: u64, from: usize, to: usize) -> impl Iterator<Item = f64> {
    let mut rng = family_stream(seed, stream, from);
    (from..to).map(move |_| inverse_normal_cdf(uniform_open(rng.next_u64())))
}

/// `count` standard normals from one stream of `seed`, for samplers outside the expansion.
pub(crate) fn standard_normals(seed: u64, stream: u64, count: usize) -> Vec<f64> {
    draw_family(seed, stream, 0, count).collect()
}

/// Standard normal quantile, Wichura (1988) AS241 `PPND16`; relative accuracy about 1e-16.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];
    fn poly(c: &[f64; 8], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = libm::sqrt(-libm::log(tail));
    let value = if r <= 5.0 {
        r -= 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        r -= 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}

/// Draws the bundle for `(seed, N)`.
pub fn draw_bundle(seed: u64, n_trunc: usize) -> NoiseBundle {
    let len = n_trunc + 1;
    NoiseBundle {
        seed,
        l1: draw_family(seed, STREAM_L1, 0, len).collect(),
        l2: draw_family(seed, STREAM_L2, 0, len).collect(),
        l3: draw_family(seed, STREAM_L3, 0, len).collect(),
        lstar: draw_family(seed, STREAM_STAR, 0, 1).next().unwrap_or_default(),
    }
}

/// Grows a drawn bundle to truncation `n2`, keeping every existing variate.
pub fn extend_bundle(b: &NoiseBundle, n2: usize) -> Result<NoiseBundle> {
    if n2 <= b.truncation() {
        return Err(Error::Precondition(format!(
            "cannot extend a bundle of truncation {} to {n2}",
            b.truncation()
        )));
    }
    let from = b.l1.len();
    let to = n2 + 1;
    let grow = |v: &[f64], stream| {
        let mut out = Vec::with_capacity(to);
        out.extend_from_slice(v);
        out.extend(draw_family(b.seed, stream, from, to));
        out
    };
    Ok(NoiseBundle {
        seed: b.seed,
        l1: grow(&b.l1, STREAM_L1),
        l2: grow(&b.l2, STREAM_L2),
        l3: grow(&b.l3, STREAM_L3),
        lstar: b.lstar,
    })
}

impl NoiseBundle {
    /// Bundle from explicit variates, e.g. for linearity checks. All three
    /// families must have the same length `N + 1 >= 1`.
    pub fn from_parts(seed: u64, l1: Vec<f64>, l2: Vec<f64>, l3: Vec<f64>, lstar: f64) -> Result<Self> {
        if l1.is_empty() || l1.len() != l2.len() || l1.len() != l3.len() {
            return Err(Error::Precondition(format!(
                "family lengths {}, {}, {} must be equal and nonzero",
                l1.len(),
                l2.len(),
                l3.len()
            )));
        }
        Ok(NoiseBundle {
            seed,
            l1,
            l2,
            l3,
            lstar,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `N`; each family holds `N + 1` variates.
    pub fn truncation(&self) -> usize {
        self.l1.len() - 1
    }

    pub fn l1(&self) -> &[f64] {
        &self.l1
    }

    pub fn l2(&self) -> &[f64] {
        &self.l2
    }

    pub fn l3(&self) -> &[f64] {
        &self.l3
    }

    pub fn lstar(&self) -> f64 {
        self.lstar
    }

    /// Total number of variates, `3N + 4`.
    pub fn len(&self) -> usize {
        3 * self.l1.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All variates in layout order.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.l1
            .iter()
            .chain(&self.l2)
            .chain(&self.l3)
            .copied()
            .chain(std::iter::once(self.lstar))
    }

    /// Prefix view at a lower truncation.
    pub fn truncated(&self, n: usize) -> Result<NoiseBundle> {
        if n > self.truncation() {
            return Err(Error::Precondition(format!(
                "truncation {n} exceeds bundle truncation {}",
                self.truncation()
            )));
        }
        Ok(NoiseBundle {
            seed: self.seed,
            l1: self.l1[..=n].to_vec(),
            l2: self.l2[..=n].to_vec(),
            l3: self.l3[..=n].to_vec(),
            lstar: self.lstar,
        })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BUNDLE_MAGIC)?;
        w.write_all(&BUNDLE_VERSION.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.truncation() as u64).to_le_bytes())?;
        for x in self.iter() {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BUNDLE_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != BUNDLE_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let mut quad = [0u8; 8];
        r.read_exact(&mut quad)?;
        let seed = u64::from_le_bytes(quad);
        r.read_exact(&mut quad)?;
        let n = u64::from_le_bytes(quad);
        let len = usize::try_from(n)
            .ok()
            .and_then(|n| n.checked_add(1))
            .ok_or_else(|| Error::Format(format!("truncation {n} too large")))?;
        let mut read_vec = |count: usize| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(count.min(1 << 24));
            for _ in 0..count {
                r.read_exact(&mut quad)?;
                out.push(f64::from_le_bytes(quad));
            }
            Ok(out)
        };
        let l1 = read_vec(len)?;
        let l2 = read_vec(len)?;
        let l3 = read_vec(len)?;
        let lstar = read_vec(1)?[0];
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes", rest.len())));
        }
        NoiseBundle::from_parts(seed, l1, l2, l3, lstar)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_reference_values() {
        assert_eq!(inverse_normal_cdf(0.5), 0.0);
        assert!((inverse_normal_cdf(0.975) - 1.959_963_984_540_054).abs() < 1e-15);
        assert!((inverse_normal_cdf(0.025) + 1.959_963_984_540_054).abs() < 1e-15);
        assert!((inverse_normal_cdf(0.841_344_746_068_542_9) - 1.0).abs() < 1e-14);
        assert!((inverse_normal_cdf(1e-10) + 6.361_340_902_404_056).abs() < 1e-12);
        assert!((inverse_normal_cdf(1e-300) + 37.047_096_299_361_2).abs() < 1e-9);
    }

    #[test]
    fn determinism_and_seed_sensitivity() {
        let a = draw_bundle(42, 7);
        let b = draw_bundle(42, 7);
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = draw_bundle(43, 7);
        assert!(a.iter().zip(c.iter()).any(|(x, y)| x != y));
        assert_eq!(a.len(), 3 * 7 + 4);
        let zero = draw_bundle(0, 3);
        assert!(zero.iter().all(f64::is_finite));
    }

    #[test]
    fn moments_of_a_large_bundle() {
        let b = draw_bundle(2024, 1023);
        let n = b.len() as f64;
        let mean = b.iter().sum::<f64>() / n;
        let var = b.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 0.12, "mean {mean}");
        assert!((0.9..=1.1).contains(&var), "var {var}");
    }

    #[test]
    fn families_are_not_copies() {
        let b = draw_bundle(5, 15);
        assert_ne!(b.l1(), b.l2());
        assert_ne!(b.l2(), b.l3());
        assert_ne!(b.l1()[0], b.lstar());
    }

    #[test]
    fn extension_nests() {
        let b = draw_bundle(42, 7);
        let e = extend_bundle(&b, 8).unwrap();
        assert_eq!(e.truncated(7).unwrap(), b);
        let big = extend_bundle(&b, 1023).unwrap();
        assert_eq!(&big.l1()[..8], b.l1());
        assert_eq!(big, draw_bundle(42, 1023));
        assert!(extend_bundle(&b, 7).is_err());
        assert!(extend_bundle(&b, 3).is_err());
    }

    #[test]
    fn extension_matches_sequential_stream() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        rng.set_stream(STREAM_L2);
        let direct: Vec<f64> = (0..40).map(|_| inverse_normal_cdf(uniform_open(rng.next_u64()))).collect();
        let grown = extend_bundle(&draw_bundle(9, 10), 39).unwrap();
        assert_eq!(grown.l2(), &direct[..]);
    }

    #[test]
    fn binary_round_trip_and_rejection() {
        let b = draw_bundle(11, 5);
        let mut buf = Vec::new();
        b.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 28 + 8 * b.len());
        assert_eq!(&buf[..8], BUNDLE_MAGIC);
        assert_eq!(NoiseBundle::read_from(&buf[..]).unwrap(), b);

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(NoiseBundle::read_from(&bad[..]), Err(Error::Format(_))));
        let mut trailing = buf.clone();
        trailing.push(0);
        assert!(NoiseBundle::read_from(&trailing[..]).is_err());
        assert!(NoiseBundle::read_from(&buf[..buf.len() - 1]).is_err());
    }
}
