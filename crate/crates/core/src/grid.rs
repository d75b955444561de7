//! Integer-grid arithmetic.
//!
//! A grid is the Cartesian product of `D` ordered axes. Arms are addressed by
//! 1-based coordinate vectors ([`ArmIndex`]) on the outside and by 0-based
//! row-major linear keys (last axis fastest) in storage.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{Error, Result};

/// One hyperparameter axis: a name and its ordered value labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<Value>,
}

#[derive(Deserialize)]
struct RawGridSpec {
    axes: Vec<Axis>,
}

/// The discrete search space.
///
/// Serializes as the manifest `{"axes": [{"name": .., "values": [..]}, ..]}`;
/// axis order is significant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGridSpec")]
pub struct GridSpec {
    axes: Vec<Axis>,
    #[serde(skip)]
    sizes: Vec<usize>,
    #[serde(skip)]
    len: usize,
}

impl TryFrom<RawGridSpec> for GridSpec {
    type Error = Error;

    fn try_from(raw: RawGridSpec) -> Result<Self> {
        GridSpec::new(raw.axes)
    }
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Config("grid needs at least one axis".into()));
        }
        let mut len: usize = 1;
        for axis in &axes {
            if axis.values.is_empty() {
                return Err(Error::Config(format!("axis `{}` has no values", axis.name)));
            }
            for (i, v) in axis.values.iter().enumerate() {
                if axis.values[..i].contains(v) {
                    return Err(Error::Config(format!(
                        "axis `{}` repeats value {v}",
                        axis.name
                    )));
                }
            }
            len = len.checked_mul(axis.values.len()).ok_or_else(|| {
                Error::Config("grid size overflows the address space".into())
            })?;
        }
        let sizes = axes.iter().map(|a| a.values.len()).collect();
        Ok(Self { axes, sizes, len })
    }

    /// A grid with axes `x1, x2, ..` whose labels are the integers `1..=N_j`.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let axes = sizes
            .iter()
            .enumerate()
            .map(|(j, &n)| Axis {
                name: format!("x{}", j + 1),
                values: (1..=n).map(Value::from).collect(),
            })
            .collect();
        Self::new(axes)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    /// Grid size `N`, the product of the axis sizes.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn check(&self, arm: &ArmIndex) -> Result<()> {
        if arm.0.len() != self.dim() {
            return Err(Error::OutOfRange(format!(
                "arm has {} coordinates, grid has {} axes",
                arm.0.len(),
                self.dim()
            )));
        }
        for ((&c, &n), axis) in arm.0.iter().zip(&self.sizes).zip(&self.axes) {
            if c < 1 || c > n {
                return Err(Error::OutOfRange(format!(
                    "coordinate {c} on axis `{}` outside [1, {n}]",
                    axis.name
                )));
            }
        }
        Ok(())
    }

    pub fn to_linear(&self, arm: &ArmIndex) -> Result<usize> {
        self.check(arm)?;
        Ok(self.linear_unchecked(&arm.0))
    }

    pub(crate) fn linear_unchecked(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.sizes)
            .fold(0, |acc, (&c, &n)| acc * n + (c - 1))
    }

    pub fn from_linear(&self, k: usize) -> Result<ArmIndex> {
        if k >= self.len {
            return Err(Error::OutOfRange(format!(
                "linear index {k} outside grid of size {}",
                self.len
            )));
        }
        Ok(ArmIndex(self.coords_unchecked(k)))
    }

    pub(crate) fn coords_unchecked(&self, mut k: usize) -> Vec<usize> {
        let mut coords = vec![0; self.dim()];
        for (c, &n) in coords.iter_mut().zip(&self.sizes).rev() {
            *c = k % n + 1;
            k /= n;
        }
        coords
    }

    /// Arms at grid distance one: ±1 on a single axis, axis-major with the
    /// decrement before the increment.
    pub fn neighbors(&self, arm: &ArmIndex) -> Result<Vec<ArmIndex>> {
        self.check(arm)?;
        let mut out = Vec::with_capacity(2 * self.dim());
        for (j, &n) in self.sizes.iter().enumerate() {
            let c = arm.0[j];
            if c > 1 {
                let mut b = arm.0.clone();
                b[j] -= 1;
                out.push(ArmIndex(b));
            }
            if c < n {
                let mut b = arm.0.clone();
                b[j] += 1;
                out.push(ArmIndex(b));
            }
        }
        Ok(out)
    }

    /// [`neighbors`](Self::neighbors) on linear keys, same order.
    pub(crate) fn neighbors_linear(&self, k: usize) -> Vec<usize> {
        let coords = self.coords_unchecked(k);
        let mut out = Vec::with_capacity(2 * self.dim());
        let mut stride = 1;
        let mut strides = vec![0; self.dim()];
        for (s, &n) in strides.iter_mut().zip(&self.sizes).rev() {
            *s = stride;
            stride *= n;
        }
        for j in 0..self.dim() {
            if coords[j] > 1 {
                out.push(k - strides[j]);
            }
            if coords[j] < self.sizes[j] {
                out.push(k + strides[j]);
            }
        }
        out
    }

    /// Coordinates scaled to `[0, 1]` per axis; single-valued axes map to 0.
    pub(crate) fn unit_coords(&self, k: usize) -> Vec<f64> {
        self.coords_unchecked(k)
            .iter()
            .zip(&self.sizes)
            .map(|(&c, &n)| if n > 1 { (c - 1) as f64 / (n - 1) as f64 } else { 0.0 })
            .collect()
    }

    /// Value labels of an arm, one per axis.
    pub fn labels(&self, arm: &ArmIndex) -> Result<Vec<&Value>> {
        self.check(arm)?;
        Ok(arm
            .0
            .iter()
            .zip(&self.axes)
            .map(|(&c, a)| &a.values[c - 1])
            .collect())
    }

    /// All arms in linear order.
    pub fn arms(&self) -> impl Iterator<Item = ArmIndex> + '_ {
        (0..self.len).map(|k| ArmIndex(self.coords_unchecked(k)))
    }
}

/// 1-based grid coordinates of an arm.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArmIndex(pub Vec<usize>);

impl ArmIndex {
    pub fn new(coords: impl Into<Vec<usize>>) -> Self {
        Self(coords.into())
    }

    pub fn coords(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for ArmIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}
