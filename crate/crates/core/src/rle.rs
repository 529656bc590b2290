//! COCO-style run-length encoded binary masks.
//!
//! Runs walk the canvas in column-major order and always start with a run
//! of zeros (possibly empty). The compact string form is the one used by
//! `pycocotools`, so segmentation outputs pass through unchanged.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rle {
    /// Canvas height.
    pub h: u32,
    /// Canvas width.
    pub w: u32,
    /// Alternating zero/one run lengths, starting with zeros.
    pub counts: Vec<u32>,
}

impl Rle {
    /// Builds a mask from run lengths, checking that they cover the canvas.
    pub fn new(h: u32, w: u32, counts: Vec<u32>) -> Result<Self> {
        let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
        if total != u64::from(h) * u64::from(w) {
            return Err(Error::InvalidMask(format!("runs cover {total} pixels, canvas is {h}x{w}")));
        }
        Ok(Self { h, w, counts })
    }

    /// Encodes a column-major bitmap of `h * w` pixels.
    pub fn from_bitmap(h: u32, w: u32, bits: &[bool]) -> Result<Self> {
        if bits.len() as u64 != u64::from(h) * u64::from(w) {
            return Err(Error::InvalidMask(format!("bitmap has {} pixels, canvas is {h}x{w}", bits.len())));
        }
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for &b in bits {
            if b != current {
                counts.push(run);
                run = 0;
                current = b;
            }
            run += 1;
        }
        counts.push(run);
        Ok(Self { h, w, counts })
    }

    /// Filled axis-aligned rectangle, clipped to the canvas.
    pub fn from_rect(h: u32, w: u32, x: u32, y: u32, rw: u32, rh: u32) -> Self {
        let mut bits = alloc::vec![false; (h as usize) * (w as usize)];
        for col in x..(x.saturating_add(rw)).min(w) {
            for row in y..(y.saturating_add(rh)).min(h) {
                bits[(col as usize) * (h as usize) + row as usize] = true;
            }
        }
        Self::from_bitmap(h, w, &bits).expect("bitmap sized from canvas")
    }

    /// Decodes to a column-major bitmap.
    pub fn to_bitmap(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity((self.h as usize) * (self.w as usize));
        let mut value = false;
        for &c in &self.counts {
            out.extend(core::iter::repeat_n(value, c as usize));
            value = !value;
        }
        out
    }

    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).map(|&c| u64::from(c)).sum()
    }

    /// Pixel count of the intersection of two masks on the same canvas.
    pub fn intersection(&self, other: &Rle) -> Result<u64> {
        if (self.h, self.w) != (other.h, other.w) {
            return Err(Error::CanvasMismatch(self.h, self.w, other.h, other.w));
        }
        let mut a = RunCursor::new(&self.counts);
        let mut b = RunCursor::new(&other.counts);
        let mut inter = 0u64;
        while let (Some((va, la)), Some((vb, lb))) = (a.peek(), b.peek()) {
            let step = la.min(lb);
            if va && vb {
                inter += step;
            }
            a.advance(step);
            b.advance(step);
        }
        Ok(inter)
    }

    /// Pixel-count IoU; two empty masks have IoU 0.
    pub fn iou(&self, other: &Rle) -> Result<f64> {
        let inter = self.intersection(other)?;
        let union = self.area() + other.area() - inter;
        Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
    }

    /// Compact string form (`pycocotools` `rleToString`).
    pub fn to_coco_string(&self) -> String {
        let mut s = String::new();
        for i in 0..self.counts.len() {
            let mut x = i64::from(self.counts[i]);
            if i > 2 {
                x -= i64::from(self.counts[i - 2]);
            }
            loop {
                let mut c = (x & 0x1f) as u8;
                x >>= 5;
                let more = if c & 0x10 != 0 { x != -1 } else { x != 0 };
                if more {
                    c |= 0x20;
                }
                s.push(char::from(c + 48));
                if !more {
                    break;
                }
            }
        }
        s
    }

    /// Parses the compact string form (`pycocotools` `rleFrString`).
    pub fn from_coco_string(h: u32, w: u32, s: &str) -> Result<Self> {
        let bytes = s.as_bytes();
        let mut counts: Vec<u32> = Vec::new();
        let mut p = 0;
        while p < bytes.len() {
            let mut x: i64 = 0;
            let mut k = 0;
            loop {
                let raw = bytes[p];
                if !(48..48 + 64).contains(&raw) {
                    return Err(Error::InvalidMask(format!("bad RLE character at offset {p}")));
                }
                if k >= 12 {
                    return Err(Error::InvalidMask(format!("RLE value too long at offset {p}")));
                }
                let c = i64::from(raw - 48);
                x |= (c & 0x1f) << (5 * k);
                p += 1;
                k += 1;
                if c & 0x20 == 0 {
                    if c & 0x10 != 0 {
                        x |= -1i64 << (5 * k);
                    }
                    break;
                }
                if p == bytes.len() {
                    return Err(Error::InvalidMask("truncated RLE string".into()));
                }
            }
            let m = counts.len();
            if m > 2 {
                x += i64::from(counts[m - 2]);
            }
            let run = u32::try_from(x).map_err(|_| Error::InvalidMask(format!("run length {x} out of range")))?;
            counts.push(run);
        }
        Self::new(h, w, counts)
    }
}

struct RunCursor<'a> {
    counts: &'a [u32],
    idx: usize,
    left: u64,
}

impl<'a> RunCursor<'a> {
    fn new(counts: &'a [u32]) -> Self {
        let mut c = Self { counts, idx: 0, left: counts.first().map_or(0, |&x| u64::from(x)) };
        c.skip_empty();
        c
    }

    fn skip_empty(&mut self) {
        while self.left == 0 && self.idx < self.counts.len() {
            self.idx += 1;
            self.left = self.counts.get(self.idx).map_or(0, |&x| u64::from(x));
        }
    }

    /// Current run value (`true` for foreground) and its remaining length.
    fn peek(&self) -> Option<(bool, u64)> {
        (self.idx < self.counts.len()).then_some((self.idx % 2 == 1, self.left))
    }

    fn advance(&mut self, n: u64) {
        self.left -= n;
        self.skip_empty();
    }
}
