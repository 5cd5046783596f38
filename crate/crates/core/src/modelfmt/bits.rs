//! LSB-first bit packing for index and code streams. Value `i` of width `w`
//! occupies bits `[i*w, (i+1)*w)` of the stream; the final byte is
//! zero-padded. No per-row padding anywhere.

/// Bits needed to store values `0..k`; at least 1.
pub fn bit_width(k: usize) -> u8 {
    if k <= 2 {
        1
    } else {
        ((k - 1).ilog2() + 1) as u8
    }
}

/// Packed byte length of `count` values of `width` bits.
pub fn packed_len(count: usize, width: u8) -> usize {
    (count * width as usize).div_ceil(8)
}

pub struct BitWriter {
    buf: Vec<u8>,
    bitpos: usize,
}

impl BitWriter {
    pub fn with_capacity(count: usize, width: u8) -> Self {
        Self {
            buf: Vec::with_capacity(packed_len(count, width)),
            bitpos: 0,
        }
    }

    pub fn write(&mut self, value: u32, width: u8) {
        assert!(width >= 1 && width <= 32);
        assert!(
            width == 32 || value < (1u32 << width),
            "value {value} does not fit in {width} bits"
        );
        let mut remaining = width as usize;
        let mut v = value;
        while remaining > 0 {
            let byte = self.bitpos / 8;
            let off = self.bitpos % 8;
            if byte == self.buf.len() {
                self.buf.push(0);
            }
            let take = remaining.min(8 - off);
            let mask = if take == 32 { u32::MAX } else { (1u32 << take) - 1 };
            self.buf[byte] |= (((v & mask) as u8) << off) as u8;
            v >>= take;
            self.bitpos += take;
            remaining -= take;
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct BitReader<'a> {
    data: &'a [u8],
    bitpos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, bitpos: 0 }
    }

    pub fn read(&mut self, width: u8) -> Option<u32> {
        debug_assert!(width >= 1 && width <= 32);
        if self.bitpos + width as usize > self.data.len() * 8 {
            return None;
        }
        let mut out = 0u32;
        let mut got = 0usize;
        while got < width as usize {
            let byte = self.bitpos / 8;
            let off = self.bitpos % 8;
            let take = (width as usize - got).min(8 - off);
            let bits = (self.data[byte] >> off) as u32 & ((1u32 << take) - 1);
            out |= bits << got;
            got += take;
            self.bitpos += take;
        }
        Some(out)
    }
}
