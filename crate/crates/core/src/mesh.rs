//! One-dimensional meshes built as dyadic refinements of a macro partition.
//!
//! Every element is identified by its refinement level and its index among
//! the `macro_count * 2^level` cells of that level, so two meshes built on
//! the same macro partition are always compatible: their common refinement
//! and their coarsest common coarsening are computed exactly in integer
//! arithmetic.

use crate::error::{Error, Result};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Element {
    pub level: u32,
    pub index: u64,
}

impl Element {
    /// Start and end in units of `macro_h / 2^finest`.
    fn span(&self, finest: u32) -> (u64, u64) {
        let s = finest - self.level;
        (self.index << s, (self.index + 1) << s)
    }

    pub fn macro_index(&self) -> u64 {
        self.index >> self.level
    }
}

/// An interval `[lo, hi]` marking the region to be refined; empty when
/// `lo >= hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn empty() -> Self {
        Self { lo: 0.0, hi: 0.0 }
    }

    pub fn is_empty(&self) -> bool {
        self.lo.partial_cmp(&self.hi) != Some(std::cmp::Ordering::Less)
    }

    pub fn shifted(&self, by: f64) -> Self {
        Self {
            lo: self.lo + by,
            hi: self.hi + by,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    a: f64,
    b: f64,
    macro_count: u64,
    macro_h: f64,
    elements: Vec<Element>,
}

/// Fine/coarse classification of the elements of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseFineSplit {
    pub fine: Vec<bool>,
}

impl CoarseFineSplit {
    pub fn fine_elements(&self) -> Vec<usize> {
        (0..self.fine.len()).filter(|&k| self.fine[k]).collect()
    }

    pub fn coarse_elements(&self) -> Vec<usize> {
        (0..self.fine.len()).filter(|&k| !self.fine[k]).collect()
    }
}

fn macro_count(a: f64, b: f64, h: f64) -> Result<u64> {
    if !(a.is_finite() && b.is_finite() && b > a) {
        return Err(Error::Config(format!("invalid domain ({a}, {b})")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Config(format!(
            "mesh size must be positive, got {h}"
        )));
    }
    let n = ((b - a) / h).round();
    if n < 1.0 {
        return Err(Error::Config(format!(
            "mesh size {h} exceeds the domain length"
        )));
    }
    Ok(n as u64)
}

impl Mesh1D {
    fn from_levels(a: f64, b: f64, macro_count: u64, levels: &[u32]) -> Self {
        let mut elements = Vec::new();
        for (m, &level) in levels.iter().enumerate() {
            let first = (m as u64) << level;
            for k in 0..(1u64 << level) {
                elements.push(Element {
                    level,
                    index: first + k,
                });
            }
        }
        Self {
            a,
            b,
            macro_count,
            macro_h: (b - a) / macro_count as f64,
            elements,
        }
    }

    /// Uniform mesh with `round((b - a) / h)` elements; these are also the
    /// macro elements.
    pub fn build_uniform(a: f64, b: f64, h: f64) -> Result<Self> {
        let n = macro_count(a, b, h)?;
        Ok(Self::from_levels(a, b, n, &vec![0; n as usize]))
    }

    /// Macro partition of width `H`, with every macro cell that overlaps
    /// `window` bisected once.
    pub fn build_window_mesh(a: f64, b: f64, macro_h: f64, window: Window) -> Result<Self> {
        let n = macro_count(a, b, macro_h)?;
        let base = Self::from_levels(a, b, n, &vec![0; n as usize]);
        base.with_window(window)
    }

    fn with_window(&self, window: Window) -> Result<Self> {
        if !window.is_empty()
            && (window.lo < self.a - 1e-12 * self.len() || window.hi > self.b + 1e-12 * self.len())
        {
            return Err(Error::Config(format!(
                "window [{}, {}] outside domain [{}, {}]",
                window.lo, window.hi, self.a, self.b
            )));
        }
        let levels: Vec<u32> = (0..self.macro_count)
            .map(|m| {
                if window.is_empty() {
                    return 0;
                }
                let (l, r) = self.macro_cell(m);
                let slack = 1e-9 * self.macro_h;
                u32::from(l < window.hi - slack && r > window.lo + slack)
            })
            .collect();
        Ok(Self::from_levels(self.a, self.b, self.macro_count, &levels))
    }

    /// Rebuilds the mesh on the same macro partition for a new window.
    pub fn advance_window(&self, new_window: Window) -> Result<Self> {
        self.with_window(new_window)
    }

    /// Every element bisected `times` times.
    pub fn refine_uniformly(&self, times: u32) -> Self {
        let mut elements = Vec::with_capacity(self.elements.len() << times);
        for e in &self.elements {
            let first = e.index << times;
            for k in 0..(1u64 << times) {
                elements.push(Element {
                    level: e.level + times,
                    index: first + k,
                });
            }
        }
        Self {
            elements,
            ..self.clone()
        }
    }

    fn len(&self) -> f64 {
        self.b - self.a
    }

    fn macro_cell(&self, m: u64) -> (f64, f64) {
        (self.coord(0, m), self.coord(0, m + 1))
    }

    fn coord(&self, level: u32, index: u64) -> f64 {
        if index == self.macro_count << level {
            return self.b;
        }
        let scaled = index as f64 * self.macro_h / (1u64 << level) as f64;
        self.a + scaled
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn macro_h(&self) -> f64 {
        self.macro_h
    }

    pub fn macro_count(&self) -> u64 {
        self.macro_count
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn finest_level(&self) -> u32 {
        self.elements.iter().map(|e| e.level).max().unwrap_or(0)
    }

    /// Left and right end of element `k`.
    pub fn element_bounds(&self, k: usize) -> (f64, f64) {
        let e = self.elements[k];
        (
            self.coord(e.level, e.index),
            self.coord(e.level, e.index + 1),
        )
    }

    pub fn width(&self, k: usize) -> f64 {
        let (l, r) = self.element_bounds(k);
        r - l
    }

    pub fn widths(&self) -> Vec<f64> {
        (0..self.elements.len()).map(|k| self.width(k)).collect()
    }

    /// All node coordinates including the two boundary nodes.
    pub fn nodes(&self) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.elements.len())
            .map(|k| self.element_bounds(k).0)
            .collect();
        x.push(self.b);
        x
    }

    /// Index of an element containing `x` (the left one at a node).
    pub fn locate(&self, x: f64, nodes: &[f64]) -> usize {
        let k = nodes.partition_point(|&p| p <= x);
        k.saturating_sub(1).min(self.elements.len() - 1)
    }

    pub fn is_compatible(&self, other: &Mesh1D) -> bool {
        self.a == other.a && self.b == other.b && self.macro_count == other.macro_count
    }

    fn require_compatible(&self, other: &Mesh1D) -> Result<()> {
        if self.is_compatible(other) {
            Ok(())
        } else {
            Err(Error::Incompatible(format!(
                "macro partitions differ: ({}, {}, {}) vs ({}, {}, {})",
                self.a, self.b, self.macro_count, other.a, other.b, other.macro_count
            )))
        }
    }

    /// Elementwise finest mesh refining both inputs.
    pub fn common_refinement(&self, other: &Mesh1D) -> Result<Mesh1D> {
        self.require_compatible(other)?;
        if self.elements == other.elements {
            return Ok(self.clone());
        }
        let finest = self.finest_level().max(other.finest_level());
        let (a, b) = (&self.elements, &other.elements);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::with_capacity(a.len().max(b.len()));
        while i < a.len() && j < b.len() {
            let (_, ea) = a[i].span(finest);
            let (_, eb) = b[j].span(finest);
            if a[i].level >= b[j].level {
                out.push(a[i]);
                i += 1;
                if ea == eb {
                    j += 1;
                }
            } else {
                out.push(b[j]);
                j += 1;
                if ea == eb {
                    i += 1;
                }
            }
        }
        Ok(Mesh1D {
            elements: out,
            ..self.clone()
        })
    }

    /// Elementwise coarsest mesh refined by both inputs; its FE space is the
    /// intersection of the two FE spaces.
    pub fn coarsest_common(&self, other: &Mesh1D) -> Result<Mesh1D> {
        self.require_compatible(other)?;
        if self.elements == other.elements {
            return Ok(self.clone());
        }
        let finest = self.finest_level().max(other.finest_level());
        let (a, b) = (&self.elements, &other.elements);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            let coarse = if a[i].level <= b[j].level { a[i] } else { b[j] };
            let (_, end) = coarse.span(finest);
            out.push(coarse);
            while i < a.len() && a[i].span(finest).1 <= end {
                i += 1;
            }
            while j < b.len() && b[j].span(finest).1 <= end {
                j += 1;
            }
        }
        Ok(Mesh1D {
            elements: out,
            ..self.clone()
        })
    }

    /// True when every element of `other` is a union of elements of `self`.
    pub fn refines(&self, other: &Mesh1D) -> bool {
        self.is_compatible(other)
            && self
                .common_refinement(other)
                .map(|m| m.elements == self.elements)
                .unwrap_or(false)
    }

    /// Fine elements are those with `h_K <= theta * max h` plus their
    /// immediate neighbours; everything else is coarse.
    pub fn coarse_fine_split(&self, theta: f64) -> Result<CoarseFineSplit> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::Config(format!(
                "threshold theta must lie in (0, 1), got {theta}"
            )));
        }
        let w = self.widths();
        let hmax = w.iter().cloned().fold(0.0, f64::max);
        let small: Vec<bool> = w.iter().map(|&h| h <= theta * hmax).collect();
        let n = w.len();
        let fine = (0..n)
            .map(|k| small[k] || (k > 0 && small[k - 1]) || (k + 1 < n && small[k + 1]))
            .collect();
        Ok(CoarseFineSplit { fine })
    }

    /// Node coordinates, one per line.
    pub fn to_node_list(&self) -> String {
        let mut s = String::new();
        for x in self.nodes() {
            let _ = writeln!(s, "{x:.16e}");
        }
        s
    }
}
