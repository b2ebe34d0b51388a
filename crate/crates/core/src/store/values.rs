//! Typed numeric columns shared by dense and CSR blocks.

use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Element type of stored values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueDtype {
    F32,
    F64,
    I32,
    U8,
}

impl ValueDtype {
    pub fn size(self) -> usize {
        match self {
            ValueDtype::F32 | ValueDtype::I32 => 4,
            ValueDtype::F64 => 8,
            ValueDtype::U8 => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ValueDtype::F32 => "f32",
            ValueDtype::F64 => "f64",
            ValueDtype::I32 => "i32",
            ValueDtype::U8 => "u8",
        }
    }

    /// Largest `k` such that every integer in `0..k` is exactly representable.
    pub fn exact_integer_limit(self) -> u64 {
        match self {
            ValueDtype::F32 => 1 << 24,
            ValueDtype::F64 => 1 << 53,
            ValueDtype::I32 => i32::MAX as u64 + 1,
            ValueDtype::U8 => 256,
        }
    }
}

impl std::str::FromStr for ValueDtype {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "f32" => Ok(ValueDtype::F32),
            "f64" => Ok(ValueDtype::F64),
            "i32" => Ok(ValueDtype::I32),
            "u8" => Ok(ValueDtype::U8),
            other => Err(format!("unknown value dtype `{other}`")),
        }
    }
}

/// A flat, typed array of values.
#[derive(Clone, Debug, PartialEq)]
pub enum Values {
    F32(Vec<f32>),
    F64(Vec<f64>),
    I32(Vec<i32>),
    U8(Vec<u8>),
}

macro_rules! each {
    ($self:expr, $v:ident => $body:expr) => {
        match $self {
            Values::F32($v) => $body,
            Values::F64($v) => $body,
            Values::I32($v) => $body,
            Values::U8($v) => $body,
        }
    };
}

macro_rules! each_pair {
    ($a:expr, $b:expr, $x:ident, $y:ident => $body:expr) => {
        match ($a, $b) {
            (Values::F32($x), Values::F32($y)) => $body,
            (Values::F64($x), Values::F64($y)) => $body,
            (Values::I32($x), Values::I32($y)) => $body,
            (Values::U8($x), Values::U8($y)) => $body,
            (a, b) => panic!("dtype mismatch: {:?} vs {:?}", a.dtype(), b.dtype()),
        }
    };
}

impl Values {
    pub fn empty(dtype: ValueDtype) -> Self {
        Self::with_capacity(dtype, 0)
    }

    pub fn with_capacity(dtype: ValueDtype, cap: usize) -> Self {
        match dtype {
            ValueDtype::F32 => Values::F32(Vec::with_capacity(cap)),
            ValueDtype::F64 => Values::F64(Vec::with_capacity(cap)),
            ValueDtype::I32 => Values::I32(Vec::with_capacity(cap)),
            ValueDtype::U8 => Values::U8(Vec::with_capacity(cap)),
        }
    }

    pub fn zeros(dtype: ValueDtype, len: usize) -> Self {
        match dtype {
            ValueDtype::F32 => Values::F32(vec![0.0; len]),
            ValueDtype::F64 => Values::F64(vec![0.0; len]),
            ValueDtype::I32 => Values::I32(vec![0; len]),
            ValueDtype::U8 => Values::U8(vec![0; len]),
        }
    }

    pub fn dtype(&self) -> ValueDtype {
        match self {
            Values::F32(_) => ValueDtype::F32,
            Values::F64(_) => ValueDtype::F64,
            Values::I32(_) => ValueDtype::I32,
            Values::U8(_) => ValueDtype::U8,
        }
    }

    pub fn len(&self) -> usize {
        each!(self, v => v.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&mut self) {
        each!(self, v => v.clear())
    }

    pub fn truncate(&mut self, len: usize) {
        each!(self, v => v.truncate(len))
    }

    pub fn slice(&self, range: Range<usize>) -> Values {
        match self {
            Values::F32(v) => Values::F32(v[range].to_vec()),
            Values::F64(v) => Values::F64(v[range].to_vec()),
            Values::I32(v) => Values::I32(v[range].to_vec()),
            Values::U8(v) => Values::U8(v[range].to_vec()),
        }
    }

    /// Appends `other[range]`. Panics on dtype mismatch.
    pub fn extend_from(&mut self, other: &Values, range: Range<usize>) {
        each_pair!(self, other, a, b => a.extend_from_slice(&b[range]))
    }

    pub fn push_zeros(&mut self, n: usize) {
        match self {
            Values::F32(v) => v.resize(v.len() + n, 0.0),
            Values::F64(v) => v.resize(v.len() + n, 0.0),
            Values::I32(v) => v.resize(v.len() + n, 0),
            Values::U8(v) => v.resize(v.len() + n, 0),
        }
    }

    /// Copies `width` elements from `src` to `dst` within the same array.
    pub fn copy_within(&mut self, src: usize, dst: usize, width: usize) {
        each!(self, v => v.copy_within(src..src + width, dst))
    }

    /// Overwrites `self[dst..dst+len]` with `other[src..src+len]`.
    pub fn copy_from(&mut self, dst: usize, other: &Values, src: usize, len: usize) {
        each_pair!(self, other, a, b => a[dst..dst + len].copy_from_slice(&b[src..src + len]))
    }

    pub fn get_f64(&self, i: usize) -> f64 {
        match self {
            Values::F32(v) => v[i] as f64,
            Values::F64(v) => v[i],
            Values::I32(v) => v[i] as f64,
            Values::U8(v) => v[i] as f64,
        }
    }

    /// Sets element `i` from an `f64`, casting to the stored type.
    pub fn set_f64(&mut self, i: usize, x: f64) {
        match self {
            Values::F32(v) => v[i] = x as f32,
            Values::F64(v) => v[i] = x,
            Values::I32(v) => v[i] = x as i32,
            Values::U8(v) => v[i] = x as u8,
        }
    }

    pub fn push_f64(&mut self, x: f64) {
        match self {
            Values::F32(v) => v.push(x as f32),
            Values::F64(v) => v.push(x),
            Values::I32(v) => v.push(x as i32),
            Values::U8(v) => v.push(x as u8),
        }
    }

    /// Parses a textual value into the stored type and appends it.
    pub fn push_parsed(&mut self, s: &str) -> Result<(), String> {
        let s = s.trim();
        let name = self.dtype().name();
        let bad = |_| format!("cannot parse `{s}` as {name}");
        match self {
            Values::F32(v) => v.push(s.parse().map_err(|_| bad(()))?),
            Values::F64(v) => v.push(s.parse().map_err(|_| bad(()))?),
            Values::I32(v) => v.push(s.parse().map_err(|_| bad(()))?),
            Values::U8(v) => v.push(s.parse().map_err(|_| bad(()))?),
        }
        Ok(())
    }

    pub fn is_zero(&self, i: usize) -> bool {
        match self {
            Values::F32(v) => v[i] == 0.0,
            Values::F64(v) => v[i] == 0.0,
            Values::I32(v) => v[i] == 0,
            Values::U8(v) => v[i] == 0,
        }
    }

    /// Bitwise comparison of `self[a..a+len]` and `other[b..b+len]`.
    pub fn range_eq(&self, a: usize, other: &Values, b: usize, len: usize) -> bool {
        match (self, other) {
            (Values::F32(x), Values::F32(y)) => x[a..a + len]
                .iter()
                .zip(&y[b..b + len])
                .all(|(p, q)| p.to_bits() == q.to_bits()),
            (Values::F64(x), Values::F64(y)) => x[a..a + len]
                .iter()
                .zip(&y[b..b + len])
                .all(|(p, q)| p.to_bits() == q.to_bits()),
            (Values::I32(x), Values::I32(y)) => x[a..a + len] == y[b..b + len],
            (Values::U8(x), Values::U8(y)) => x[a..a + len] == y[b..b + len],
            _ => false,
        }
    }

    /// Appends the little-endian encoding of every element to `out`.
    pub fn write_le(&self, out: &mut Vec<u8>) {
        self.write_range_le(0..self.len(), out)
    }

    pub fn write_range_le(&self, range: Range<usize>, out: &mut Vec<u8>) {
        out.reserve(range.len() * self.dtype().size());
        match self {
            Values::F32(v) => v[range].iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Values::F64(v) => v[range].iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Values::I32(v) => v[range].iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Values::U8(v) => out.extend_from_slice(&v[range]),
        }
    }

    /// Decodes little-endian values. `bytes.len()` must be a multiple of the dtype size.
    pub fn read_le(dtype: ValueDtype, bytes: &[u8]) -> Values {
        debug_assert_eq!(bytes.len() % dtype.size(), 0);
        match dtype {
            ValueDtype::F32 => Values::F32(
                bytes
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
            ),
            ValueDtype::F64 => Values::F64(
                bytes
                    .chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
            ),
            ValueDtype::I32 => Values::I32(
                bytes
                    .chunks_exact(4)
                    .map(|b| i32::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
            ),
            ValueDtype::U8 => Values::U8(bytes.to_vec()),
        }
    }

    /// Appends little-endian decoded values.
    pub fn extend_from_le(&mut self, bytes: &[u8]) {
        match self {
            Values::F32(v) => v.extend(
                bytes
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap())),
            ),
            Values::F64(v) => v.extend(
                bytes
                    .chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().unwrap())),
            ),
            Values::I32(v) => v.extend(
                bytes
                    .chunks_exact(4)
                    .map(|b| i32::from_le_bytes(b.try_into().unwrap())),
            ),
            Values::U8(v) => v.extend_from_slice(bytes),
        }
    }
}
