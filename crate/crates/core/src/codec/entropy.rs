//! Frozen per-channel integer probability tables and the payload format
//! built on them.
//!
//! Symbols `-L..=L` map to table indices `0..=2L`; index `2L + 1` is the
//! escape symbol, followed by the raw value as 16 uniformly coded bits.
//!
//! Payload layout (little-endian): `u32` symbol count, `u32` CRC-32 of the
//! symbols (each as `i16` LE), then the range-coded bytes. An empty latent is
//! the 8-byte header alone.

use serde::{Deserialize, Serialize};

use super::rangecoder::{RangeDecoder, RangeEncoder, PRECISION};
use super::Latent;
use crate::error::{Error, Result};

/// Bytes of payload framing preceding the range-coded stream.
pub const PAYLOAD_HEADER_BYTES: usize = 8;
/// Cost of the raw value following an escape symbol.
pub const ESCAPE_RAW_BITS: f64 = 16.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntropyModel {
    pub symbol_range: i32,
    pub table_precision: u32,
    /// One cumulative table of `2L + 3` entries per latent channel.
    pub cmfs: Vec<Vec<u32>>,
}

impl EntropyModel {
    pub fn num_symbols(&self) -> usize {
        2 * self.symbol_range as usize + 2
    }

    pub fn escape_index(&self) -> usize {
        self.num_symbols() - 1
    }

    pub fn channels(&self) -> usize {
        self.cmfs.len()
    }

    /// Builds a model from per-channel integer frequencies (one per symbol,
    /// escape last).
    pub fn from_frequencies(symbol_range: i32, freqs: &[Vec<u32>]) -> Result<Self> {
        let cmfs = freqs
            .iter()
            .map(|f| {
                let mut cmf = Vec::with_capacity(f.len() + 1);
                let mut acc = 0u32;
                cmf.push(0);
                for &v in f {
                    acc += v;
                    cmf.push(acc);
                }
                cmf
            })
            .collect();
        let m = EntropyModel {
            symbol_range,
            table_precision: PRECISION,
            cmfs,
        };
        m.validate()?;
        Ok(m)
    }

    /// Quantizes per-channel probability vectors (escape last) to tables in
    /// which every symbol keeps at least one count.
    pub fn from_probabilities(symbol_range: i32, pmfs: &[Vec<f64>]) -> Result<Self> {
        let total = 1u32 << PRECISION;
        let freqs: Vec<Vec<u32>> = pmfs.iter().map(|p| quantize_pmf(p, total)).collect();
        Self::from_frequencies(symbol_range, &freqs)
    }

    pub fn uniform(symbol_range: i32, channels: usize) -> Result<Self> {
        let n = 2 * symbol_range as usize + 2;
        Self::from_probabilities(symbol_range, &vec![vec![1.0 / n as f64; n]; channels])
    }

    pub fn validate(&self) -> Result<()> {
        if self.table_precision != PRECISION {
            return Err(Error::Checkpoint(format!("unsupported table precision {}", self.table_precision)));
        }
        if self.symbol_range < 0 {
            return Err(Error::Checkpoint("negative symbol range".into()));
        }
        let n = self.num_symbols();
        for (c, cmf) in self.cmfs.iter().enumerate() {
            if cmf.len() != n + 1 || cmf[0] != 0 || *cmf.last().unwrap() != 1 << PRECISION {
                return Err(Error::Checkpoint(format!("channel {c}: malformed cumulative table")));
            }
            if cmf.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Checkpoint(format!("channel {c}: table is not strictly increasing")));
            }
        }
        Ok(())
    }

    fn index_of(&self, value: i32) -> usize {
        if value.abs() <= self.symbol_range {
            (value + self.symbol_range) as usize
        } else {
            self.escape_index()
        }
    }

    /// Probability of table index `s` in `channel`.
    pub fn probability(&self, channel: usize, s: usize) -> f64 {
        let cmf = &self.cmfs[channel];
        (cmf[s + 1] - cmf[s]) as f64 / (1u64 << PRECISION) as f64
    }

    fn check_value(value: i32) -> Result<()> {
        if value < i16::MIN as i32 || value > i16::MAX as i32 {
            return Err(Error::Symbol {
                value,
                reason: "outside the 16-bit escape range".into(),
            });
        }
        Ok(())
    }

    fn check_latent(&self, latent: &Latent) -> Result<()> {
        if latent.is_empty() {
            return Ok(());
        }
        if latent.channels != self.channels() {
            return Err(Error::CheckpointMismatch(format!(
                "latent has {} channels, entropy model {}",
                latent.channels,
                self.channels()
            )));
        }
        if let Some(v) = latent.values.iter().find(|v| v.fract() != 0.0 || !v.is_finite()) {
            return Err(Error::Symbol {
                value: *v as i32,
                reason: "latent is not quantized".into(),
            });
        }
        Ok(())
    }

    /// Ideal code length in bits of a quantized latent under this model.
    pub fn estimate_rate(&self, latent: &Latent) -> Result<f64> {
        self.check_latent(latent)?;
        let plane = latent.height * latent.width;
        let mut bits = 0.0;
        for (i, &v) in latent.values.iter().enumerate() {
            let v = v as i32;
            Self::check_value(v)?;
            let s = self.index_of(v);
            bits -= self.probability(i / plane, s).log2();
            if s == self.escape_index() {
                bits += ESCAPE_RAW_BITS;
            }
        }
        Ok(bits)
    }

    pub fn encode(&self, latent: &Latent) -> Result<Vec<u8>> {
        self.check_latent(latent)?;
        let symbols = latent.symbols();
        let mut crc = crc32fast::Hasher::new();
        for &v in &symbols {
            Self::check_value(v)?;
            crc.update(&(v as i16).to_le_bytes());
        }
        let mut out = Vec::with_capacity(PAYLOAD_HEADER_BYTES + symbols.len() / 4);
        out.extend_from_slice(&(symbols.len() as u32).to_le_bytes());
        out.extend_from_slice(&crc.finalize().to_le_bytes());
        if symbols.is_empty() {
            return Ok(out);
        }
        let plane = latent.height * latent.width;
        let mut enc = RangeEncoder::new();
        for (i, &v) in symbols.iter().enumerate() {
            let cmf = &self.cmfs[i / plane];
            let s = self.index_of(v);
            enc.encode(cmf[s], cmf[s + 1] - cmf[s]);
            if s == self.escape_index() {
                enc.encode((v as i16) as u16 as u32, 1);
            }
        }
        out.extend_from_slice(&enc.finish());
        Ok(out)
    }

    pub fn decode(&self, payload: &[u8], shape: (usize, usize, usize)) -> Result<Latent> {
        let (c, h, w) = shape;
        let n = c * h * w;
        if payload.len() < PAYLOAD_HEADER_BYTES {
            return Err(Error::Decode("payload shorter than its header".into()));
        }
        let count = u32::from_le_bytes(payload[0..4].try_into().unwrap()) as usize;
        let crc_stored = u32::from_le_bytes(payload[4..8].try_into().unwrap());
        if count != n {
            return Err(Error::Decode(format!("payload holds {count} symbols, expected {n}")));
        }
        if n == 0 {
            if payload.len() != PAYLOAD_HEADER_BYTES {
                return Err(Error::Decode("trailing bytes after empty payload".into()));
            }
            return Ok(Latent::from_symbols(c, h, w, &[]));
        }
        if c != self.channels() {
            return Err(Error::CheckpointMismatch(format!(
                "shape has {c} channels, entropy model {}",
                self.channels()
            )));
        }
        let plane = h * w;
        let mut dec = RangeDecoder::new(&payload[PAYLOAD_HEADER_BYTES..])?;
        let mut symbols = Vec::with_capacity(n);
        let mut crc = crc32fast::Hasher::new();
        for i in 0..n {
            let s = dec.decode(&self.cmfs[i / plane])?;
            let v = if s == self.escape_index() {
                dec.decode_raw16()? as i16 as i32
            } else {
                s as i32 - self.symbol_range
            };
            crc.update(&(v as i16).to_le_bytes());
            symbols.push(v);
        }
        if !dec.is_exhausted() {
            return Err(Error::Decode("trailing bytes after range-coded stream".into()));
        }
        if crc.finalize() != crc_stored {
            return Err(Error::Decode("checksum mismatch".into()));
        }
        Ok(Latent::from_symbols(c, h, w, &symbols))
    }
}

/// Integer frequencies summing to `total`, each at least 1, proportional to
/// `pmf` (renormalized).
pub fn quantize_pmf(pmf: &[f64], total: u32) -> Vec<u32> {
    let n = pmf.len();
    assert!(n > 0 && (n as u32) <= total);
    let sum: f64 = pmf.iter().map(|p| p.max(0.0)).sum();
    let spare = (total - n as u32) as f64;
    let mut freqs: Vec<u32> = pmf
        .iter()
        .map(|&p| {
            let p = if sum > 0.0 { p.max(0.0) / sum } else { 1.0 / n as f64 };
            1 + (p * spare).floor() as u32
        })
        .collect();
    let assigned: u32 = freqs.iter().sum();
    let mut remaining = total - assigned;
    // hand out leftover counts to the largest symbols first, ties by index
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pmf[b].partial_cmp(&pmf[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let mut k = 0;
    while remaining > 0 {
        freqs[order[k % n]] += 1;
        remaining -= 1;
        k += 1;
    }
    freqs
}

/// Ideal code length of a quantized latent in bits.
pub fn estimate_rate(latent: &Latent, model: &EntropyModel) -> Result<f64> {
    model.estimate_rate(latent)
}

pub fn entropy_encode(latent: &Latent, model: &EntropyModel) -> Result<Vec<u8>> {
    model.encode(latent)
}

pub fn entropy_decode(payload: &[u8], model: &EntropyModel, shape: (usize, usize, usize)) -> Result<Latent> {
    model.decode(payload, shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_symbol_uniform_costs_one_bit_each() {
        let m = EntropyModel::uniform(0, 1).unwrap();
        assert_eq!(m.cmfs[0], vec![0, 32768, 65536]);
        let l = Latent::from_symbols(1, 1, 10, &[0; 10]);
        assert_eq!(m.estimate_rate(&l).unwrap(), 10.0);
    }

    #[test]
    fn near_certain_symbol_is_almost_free() {
        let m = EntropyModel::from_frequencies(0, &[vec![65535, 1]]).unwrap();
        let l = Latent::from_symbols(1, 1, 100, &[0; 100]);
        let bits = m.estimate_rate(&l).unwrap();
        assert!(bits > 0.0 && bits < 0.01, "{bits}");
    }

    #[test]
    fn four_symbol_uniform_payload_size() {
        let m = EntropyModel::uniform(1, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let syms: Vec<i32> = (0..1000).map(|_| rng.gen_range(-1..=1)).collect();
        let l = Latent::from_symbols(1, 10, 100, &syms);
        let est = m.estimate_rate(&l).unwrap();
        assert!((est - 2000.0).abs() < 1e-6);
        let bytes = m.encode(&l).unwrap();
        assert!((bytes.len() as f64) <= est / 8.0 * 1.02 + 16.0, "{}", bytes.len());
        assert!(bytes.len() >= 250);
        assert_eq!(m.encode(&l).unwrap(), bytes);
        assert_eq!(m.decode(&bytes, l.shape()).unwrap(), l);
    }

    #[test]
    fn empty_latent_is_header_only() {
        let m = EntropyModel::uniform(4, 2).unwrap();
        let bytes = m.encode(&Latent::empty()).unwrap();
        assert_eq!(bytes.len(), PAYLOAD_HEADER_BYTES);
        assert!(m.decode(&bytes, (0, 0, 0)).unwrap().is_empty());
    }

    #[test]
    fn escape_carries_raw_values() {
        let m = EntropyModel::uniform(2, 1).unwrap();
        let syms = [0, 3, -3, 32767, -32768, 2, -2, 1000];
        let l = Latent::from_symbols(1, 2, 4, &syms);
        let bytes = m.encode(&l).unwrap();
        assert_eq!(m.decode(&bytes, (1, 2, 4)).unwrap().symbols(), syms);
        let too_big = Latent::from_symbols(1, 1, 1, &[40000]);
        assert!(matches!(m.encode(&too_big), Err(Error::Symbol { .. })));
    }

    #[test]
    fn truncation_and_corruption_are_detected() {
        let m = EntropyModel::uniform(8, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let syms: Vec<i32> = (0..200).map(|_| rng.gen_range(-8..=8)).collect();
        let l = Latent::from_symbols(2, 10, 10, &syms);
        let bytes = m.encode(&l).unwrap();
        let err = m.decode(&bytes[..bytes.len() - 1], l.shape()).unwrap_err();
        assert!(matches!(err, Error::Decode(_)));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(m.decode(&extra, l.shape()).is_err());
        for i in PAYLOAD_HEADER_BYTES..bytes.len() {
            let mut bad = bytes.clone();
            bad[i] ^= 0x5A;
            if let Ok(got) = m.decode(&bad, l.shape()) {
                assert_eq!(got, l, "corruption at byte {i} produced different symbols");
            }
        }
        assert!(m.decode(&bytes, (2, 10, 9)).is_err());
    }

    #[test]
    fn quantized_tables_keep_every_symbol() {
        let pmf = vec![0.999999, 0.0, 1e-12, 0.000001];
        let f = quantize_pmf(&pmf, 1 << 16);
        assert_eq!(f.iter().sum::<u32>(), 1 << 16);
        assert!(f.iter().all(|&v| v >= 1));
        assert!(f[0] > 65000);
    }
}
