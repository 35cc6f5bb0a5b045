//! Two-layer container:
//!
//! ```text
//! "SICR" | u8 version | u16 width | u16 height
//!        | u32 base_len | base payload | u32 enh_len | enh payload
//! ```
//!
//! All integers little-endian.

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"SICR";
pub const VERSION: u8 = 1;
/// Container bytes that are not payload.
pub const CONTAINER_OVERHEAD: usize = 4 + 1 + 2 + 2 + 4 + 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitstream {
    pub version: u8,
    pub width: u16,
    pub height: u16,
    pub base_payload: Vec<u8>,
    pub enh_payload: Vec<u8>,
}

impl Bitstream {
    pub fn new(width: usize, height: usize, base_payload: Vec<u8>, enh_payload: Vec<u8>) -> Result<Self> {
        let to16 = |v: usize, what: &str| {
            u16::try_from(v)
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| Error::Config(format!("{what} {v} does not fit the container")))
        };
        Ok(Bitstream {
            version: VERSION,
            width: to16(width, "width")?,
            height: to16(height, "height")?,
            base_payload,
            enh_payload,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width as usize, self.height as usize)
    }

    pub fn total_len(&self) -> usize {
        CONTAINER_OVERHEAD + self.base_payload.len() + self.enh_payload.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.total_len());
        out.extend_from_slice(&MAGIC);
        out.push(self.version);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&(self.base_payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.base_payload);
        out.extend_from_slice(&(self.enh_payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.enh_payload);
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(Error::Decode("bad magic, not a SICR bitstream".into()));
        }
        let version = cur.take(1)?[0];
        if version != VERSION {
            return Err(Error::Decode(format!("unsupported bitstream version {version}")));
        }
        let width = u16::from_le_bytes(cur.take(2)?.try_into().unwrap());
        let height = u16::from_le_bytes(cur.take(2)?.try_into().unwrap());
        if width == 0 || height == 0 {
            return Err(Error::Decode("zero image dimension".into()));
        }
        let base_len = u32::from_le_bytes(cur.take(4)?.try_into().unwrap()) as usize;
        let base_payload = cur.take(base_len)?.to_vec();
        let enh_len = u32::from_le_bytes(cur.take(4)?.try_into().unwrap()) as usize;
        let enh_payload = cur.take(enh_len)?.to_vec();
        if cur.pos != bytes.len() {
            return Err(Error::Decode("trailing bytes after bitstream".into()));
        }
        Ok(Bitstream {
            version,
            width,
            height,
            base_payload,
            enh_payload,
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Decode("truncated bitstream".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_layout() {
        let bs = Bitstream::new(300, 2, vec![1, 2, 3], vec![9]).unwrap();
        let bytes = bs.to_bytes();
        assert_eq!(
            bytes,
            vec![b'S', b'I', b'C', b'R', 1, 0x2C, 0x01, 2, 0, 3, 0, 0, 0, 1, 2, 3, 1, 0, 0, 0, 9]
        );
        assert_eq!(bytes.len(), bs.total_len());
    }

    #[test]
    fn rejects_truncation_and_garbage() {
        let bytes = Bitstream::new(4, 4, vec![7; 10], vec![8; 5]).unwrap().to_bytes();
        assert!(Bitstream::parse(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Bitstream::parse(&extra).is_err());
        let mut magic = bytes;
        magic[0] = b'X';
        assert!(Bitstream::parse(&magic).is_err());
        assert!(Bitstream::new(70000, 1, vec![], vec![]).is_err());
    }

    proptest! {
        #[test]
        fn parse_inverts_serialize(
            w in 1u16.., h in 1u16..,
            base in proptest::collection::vec(any::<u8>(), 0..64),
            enh in proptest::collection::vec(any::<u8>(), 0..64),
        ) {
            let bs = Bitstream::new(w as usize, h as usize, base.clone(), enh.clone()).unwrap();
            let bytes = bs.to_bytes();
            prop_assert_eq!(bytes.len(), CONTAINER_OVERHEAD + base.len() + enh.len());
            prop_assert_eq!(Bitstream::parse(&bytes).unwrap(), bs);
        }
    }
}
