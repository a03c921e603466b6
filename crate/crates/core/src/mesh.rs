//! Radial meshes on `[r_in, R]`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::params::ProblemParams;

/// Smallest element count accepted by [`build_mesh`].
pub const MIN_ELEMENTS: usize = 8;

/// How the nodes were laid out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grading {
    /// Geometric ratio between consecutive element sizes inside the
    /// origin layer; `1.0` means uniform.
    pub ratio: f64,
    /// Number of extra nodes placed geometrically inside the first uniform
    /// cell `[0, H]`.
    pub layers: usize,
}

impl Grading {
    pub const UNIFORM: Grading = Grading {
        ratio: 1.0,
        layers: 0,
    };
}

/// Ordered node set `rho_0 < rho_1 < ... < rho_M` on `[r_in, R]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialMesh {
    nodes: Vec<f64>,
    grading: Grading,
}

impl RadialMesh {
    /// Mesh from explicit nodes; they must be strictly increasing and
    /// non-negative.
    pub fn from_nodes(nodes: Vec<f64>, grading: Grading) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::Config(format!(
                "a mesh needs at least 2 elements, got {}",
                nodes.len().saturating_sub(1)
            )));
        }
        if !(nodes[0] >= 0.0) {
            return Err(Error::Config(format!("first node {} is negative", nodes[0])));
        }
        if let Some(i) = nodes.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Config(format!(
                "nodes are not strictly increasing at index {i}"
            )));
        }
        Ok(RadialMesh { nodes, grading })
    }

    /// Uniform mesh with `elements` cells on `[a, b]`.
    pub fn uniform(a: f64, b: f64, elements: usize) -> Result<Self> {
        if elements < 2 {
            return Err(Error::Config("uniform mesh needs at least 2 elements".into()));
        }
        let h = (b - a) / elements as f64;
        let mut nodes: Vec<f64> = (0..=elements).map(|i| a + h * i as f64).collect();
        nodes[elements] = b;
        Self::from_nodes(nodes, Grading::UNIFORM)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn grading(&self) -> Grading {
        self.grading
    }

    pub fn elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn inner(&self) -> f64 {
        self.nodes[0]
    }

    pub fn outer(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn element(&self, e: usize) -> (f64, f64) {
        (self.nodes[e], self.nodes[e + 1])
    }

    pub fn element_sizes(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.windows(2).map(|w| w[1] - w[0])
    }

    pub fn max_element_size(&self) -> f64 {
        self.element_sizes().fold(0.0, f64::max)
    }

    /// Moves the node nearest to each breakpoint onto it, leaving the end
    /// nodes in place. Used to give nested annulus meshes shared nodes.
    pub fn with_breakpoints(&self, breakpoints: &[f64]) -> Result<Self> {
        let mut nodes = self.nodes.clone();
        let last = nodes.len() - 1;
        for &r in breakpoints {
            if !(r > nodes[0] && r < nodes[last]) {
                return Err(Error::range("breakpoint", r, "inside the mesh"));
            }
            let (i, _) = nodes
                .iter()
                .enumerate()
                .skip(1)
                .take(last - 1)
                .min_by(|a, b| (a.1 - r).abs().total_cmp(&(b.1 - r).abs()))
                .unwrap();
            nodes[i] = r;
        }
        Self::from_nodes(nodes, self.grading)
    }

    /// Index of the node equal to `r`, if any.
    pub fn node_index(&self, r: f64) -> Option<usize> {
        self.nodes.iter().position(|&x| x == r)
    }

    /// The sub-mesh of nodes `rho >= r`, where `r` must be a node.
    pub fn restrict_from(&self, r: f64) -> Result<Self> {
        let i = self
            .node_index(r)
            .ok_or_else(|| Error::Config(format!("{r} is not a mesh node")))?;
        Self::from_nodes(self.nodes[i..].to_vec(), Grading::UNIFORM)
    }

    /// CSV listing of the node radii.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,r\n");
        for (i, r) in self.nodes.iter().enumerate() {
            writeln!(s, "{i},{r:.16e}").unwrap();
        }
        s
    }

    /// Versioned text dump; floats are written in shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut s = String::from("hardyflow-mesh v1\n");
        writeln!(s, "ratio {:e}", self.grading.ratio).unwrap();
        writeln!(s, "layers {}", self.grading.layers).unwrap();
        writeln!(s, "nodes {}", self.nodes.len()).unwrap();
        for r in &self.nodes {
            writeln!(s, "{r:e}").unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some("hardyflow-mesh v1") {
            return Err(Error::Format("missing or unsupported mesh header".into()));
        }
        let mut field = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Format(format!("missing {key}")))?;
            line.strip_prefix(key)
                .map(|v| v.trim().to_string())
                .ok_or_else(|| Error::Format(format!("expected {key}, found {line:?}")))
        };
        let parse = |v: String| -> Result<f64> {
            v.parse().map_err(|_| Error::Format(format!("bad number {v:?}")))
        };
        let ratio = parse(field("ratio")?)?;
        let layers: usize = field("layers")?
            .parse()
            .map_err(|_| Error::Format("bad layer count".into()))?;
        let count: usize = field("nodes")?
            .parse()
            .map_err(|_| Error::Format("bad node count".into()))?;
        let nodes = lines
            .take(count)
            .map(|l| parse(l.trim().to_string()))
            .collect::<Result<Vec<f64>>>()?;
        if nodes.len() != count {
            return Err(Error::Format("truncated node list".into()));
        }
        Self::from_nodes(nodes, Grading { ratio, layers })
    }
}

/// Builds the radial mesh for `params` with `elements` cells.
///
/// On the ball with `ratio < 1` the outer part is uniform with spacing `H`
/// and the first cell `[0, H]` is split into `L + 1` pieces whose sizes grow
/// by `1/ratio` away from the origin, `L = min(elements / 8, log(1e-6) /
/// log(ratio))`. Annuli and `ratio = 1` give a uniform mesh.
pub fn build_mesh(params: &ProblemParams, elements: usize, ratio: f64) -> Result<RadialMesh> {
    if elements < MIN_ELEMENTS {
        return Err(Error::Config(format!(
            "mesh needs at least {MIN_ELEMENTS} elements, got {elements}"
        )));
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::range("grading ratio", ratio, "(0, 1]"));
    }
    let (a, b) = (params.inner_radius, params.outer_radius);
    if !(b > a && a >= 0.0) {
        return Err(Error::Config(format!("invalid radial interval [{a}, {b}]")));
    }
    if a > 0.0 || ratio == 1.0 {
        return RadialMesh::uniform(a, b, elements);
    }
    // first uniform cell split geometrically, smallest piece >= 1e-6 of it
    let cap = (1e-6f64.ln() / ratio.ln()).floor().max(1.0) as usize;
    let layers = (elements / 8).min(cap);
    let uniform = elements - layers;
    let h = b / uniform as f64;
    let scale = h * (1.0 - ratio) / (1.0 - ratio.powi(layers as i32 + 1));
    let mut nodes = Vec::with_capacity(elements + 1);
    nodes.push(0.0);
    let mut x = 0.0;
    for k in (1..=layers).rev() {
        x += scale * ratio.powi(k as i32);
        nodes.push(x);
    }
    for j in 1..=uniform {
        nodes.push(h * j as f64);
    }
    nodes[elements] = b;
    RadialMesh::from_nodes(nodes, Grading { ratio, layers })
}

/// Element count and grading ratio, applied to whatever domain a run uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshSpec {
    pub elements: usize,
    pub ratio: f64,
}

impl MeshSpec {
    pub const fn new(elements: usize, ratio: f64) -> Self {
        MeshSpec { elements, ratio }
    }

    pub fn build(&self, params: &ProblemParams) -> Result<RadialMesh> {
        build_mesh(params, self.elements, self.ratio)
    }
}

impl Default for MeshSpec {
    fn default() -> Self {
        MeshSpec::new(512, 0.75)
    }
}
