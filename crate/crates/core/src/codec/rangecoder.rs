//! Byte-oriented range coder with carry propagation (LZMA-style low/cache
//! scheme) over 16-bit cumulative frequency tables.

use crate::error::{Error, Result};

/// Probability precision in bits; every table sums to `1 << PRECISION`.
pub const PRECISION: u32 = 16;
const TOP: u32 = 1 << 24;

pub struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    cache_size: u64,
    out: Vec<u8>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        RangeEncoder {
            low: 0,
            range: u32::MAX,
            cache: 0,
            cache_size: 1,
            out: Vec::new(),
        }
    }

    /// Encodes the interval `[start, start + freq)` out of `1 << PRECISION`.
    pub fn encode(&mut self, start: u32, freq: u32) {
        debug_assert!(freq > 0 && start + freq <= 1 << PRECISION);
        let r = self.range >> PRECISION;
        self.low += r as u64 * start as u64;
        self.range = r * freq;
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    fn shift_low(&mut self) {
        if (self.low as u32) < 0xFF00_0000 || (self.low >> 32) != 0 {
            let carry = (self.low >> 32) as u8;
            let mut temp = self.cache;
            loop {
                self.out.push(temp.wrapping_add(carry));
                temp = 0xFF;
                self.cache_size -= 1;
                if self.cache_size == 0 {
                    break;
                }
            }
            self.cache = ((self.low >> 24) & 0xFF) as u8;
        }
        self.cache_size += 1;
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

pub struct RangeDecoder<'a> {
    code: u32,
    range: u32,
    input: &'a [u8],
    pos: usize,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(input: &'a [u8]) -> Result<Self> {
        let mut d = RangeDecoder {
            code: 0,
            range: u32::MAX,
            input,
            pos: 0,
        };
        if d.next_byte()? != 0 {
            return Err(Error::Decode("range coder stream must start with a zero byte".into()));
        }
        for _ in 0..4 {
            d.code = (d.code << 8) | d.next_byte()? as u32;
        }
        Ok(d)
    }

    fn next_byte(&mut self) -> Result<u8> {
        let b = *self
            .input
            .get(self.pos)
            .ok_or_else(|| Error::Decode("truncated payload".into()))?;
        self.pos += 1;
        Ok(b)
    }

    /// Target frequency of the next symbol; follow with [`Self::consume`].
    pub fn peek(&mut self) -> Result<(u32, u32)> {
        let r = self.range >> PRECISION;
        let v = self.code / r;
        if v >= 1 << PRECISION {
            return Err(Error::Decode("corrupt payload (target out of range)".into()));
        }
        Ok((v, r))
    }

    pub fn consume(&mut self, r: u32, start: u32, freq: u32) -> Result<()> {
        self.code -= r * start;
        self.range = r * freq;
        if self.code >= self.range {
            return Err(Error::Decode("corrupt payload (code outside interval)".into()));
        }
        while self.range < TOP {
            self.code = (self.code << 8) | self.next_byte()? as u32;
            self.range <<= 8;
        }
        Ok(())
    }

    /// Decodes a symbol from a cumulative table (`cmf[0] = 0`,
    /// `cmf.last() = 1 << PRECISION`).
    pub fn decode(&mut self, cmf: &[u32]) -> Result<usize> {
        let (v, r) = self.peek()?;
        // last index with cmf[i] <= v
        let s = cmf.partition_point(|&c| c <= v) - 1;
        self.consume(r, cmf[s], cmf[s + 1] - cmf[s])?;
        Ok(s)
    }

    pub fn decode_raw16(&mut self) -> Result<u16> {
        let (v, r) = self.peek()?;
        self.consume(r, v, 1)?;
        Ok(v as u16)
    }

    pub fn bytes_consumed(&self) -> usize {
        self.pos
    }

    pub fn is_exhausted(&self) -> bool {
        self.pos == self.input.len()
    }
}
