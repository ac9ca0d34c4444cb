//! Level-set tracing of the support boundary `P00(z) = 1/tau` by marching
//! squares, with every crossing refined by bisection along its grid edge.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{p00, ValidatedSpec};
use crate::error::{Error, Result};
use crate::numeric::bisect;

/// Residual target for refined crossing points.
pub const REFINE_TOL: f64 = 1e-10;

/// Axis-aligned rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Window {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Window { x_min, x_max, y_min, y_max }
    }

    pub fn square(half_width: f64) -> Self {
        Window::new(-half_width, half_width, -half_width, half_width)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub points: Vec<Complex64>,
    /// The last point connects back to the first.
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    pub polylines: Vec<Polyline>,
    pub grid_resolution: f64,
}

impl BoundaryCurve {
    pub fn vertices(&self) -> impl Iterator<Item = &Complex64> {
        self.polylines.iter().flat_map(|p| p.points.iter())
    }

    /// CSV with columns `curve_id,x,y`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "curve_id,x,y")?;
        for (id, line) in self.polylines.iter().enumerate() {
            for p in &line.points {
                writeln!(out, "{id},{},{}", p.re, p.im)?;
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }
}

/// Grid edge identifier: horizontal edges join `(i, j)`-`(i+1, j)`,
/// vertical edges join `(i, j)`-`(i, j+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum EdgeId {
    H(usize, usize),
    V(usize, usize),
}

struct Grid<'a> {
    spec: &'a ValidatedSpec,
    window: Window,
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    level: f64,
    values: Vec<f64>,
}

impl Grid<'_> {
    fn node(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.window.x_min + i as f64 * self.dx, self.window.y_min + j as f64 * self.dy)
    }

    fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    fn inside(&self, i: usize, j: usize) -> bool {
        self.value(i, j) > 0.0
    }

    fn residual(&self, z: Complex64) -> f64 {
        match p00(self.spec, z) {
            Ok(p) => p - self.level,
            Err(_) => f64::INFINITY,
        }
    }

    fn crossing(&self, edge: EdgeId) -> Complex64 {
        let (a, b) = match edge {
            EdgeId::H(i, j) => (self.node(i, j), self.node(i + 1, j)),
            EdgeId::V(i, j) => (self.node(i, j), self.node(i, j + 1)),
        };
        let s = bisect(|s| self.residual(a + (b - a) * s), 0.0, 1.0, REFINE_TOL);
        a + (b - a) * s
    }
}

/// Traces `P00 = 1/tau` inside `window` on a grid of spacing at most
/// `resolution`. Open polylines end on the window border.
pub fn trace_boundary(spec: &ValidatedSpec, window: Window, resolution: f64) -> Result<BoundaryCurve> {
    if !(resolution > 0.0) || !(window.x_max > window.x_min) || !(window.y_max > window.y_min) {
        return Err(Error::Config("trace_boundary needs a non-empty window and resolution > 0".into()));
    }
    let nx = ((window.x_max - window.x_min) / resolution).ceil() as usize + 1;
    let ny = ((window.y_max - window.y_min) / resolution).ceil() as usize + 1;
    let dx = (window.x_max - window.x_min) / (nx - 1) as f64;
    let dy = (window.y_max - window.y_min) / (ny - 1) as f64;
    let level = 1.0 / spec.tau;
    let mut values = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let z = Complex64::new(window.x_min + i as f64 * dx, window.y_min + j as f64 * dy);
            values.push(p00(spec, z)? - level);
        }
    }
    let grid = Grid { spec, window, nx, ny, dx, dy, level, values };

    let segments = cell_segments(&grid);
    if segments.is_empty() {
        return Err(Error::EmptyLevelSet);
    }
    let chains = link_segments(&segments);

    let mut cache: HashMap<EdgeId, Complex64> = HashMap::new();
    let polylines = chains
        .into_iter()
        .map(|(edges, closed)| Polyline {
            points: edges
                .into_iter()
                .map(|e| *cache.entry(e).or_insert_with(|| grid.crossing(e)))
                .collect(),
            closed,
        })
        .collect();
    Ok(BoundaryCurve { polylines, grid_resolution: resolution })
}

fn cell_segments(grid: &Grid<'_>) -> Vec<(EdgeId, EdgeId)> {
    let mut segments = Vec::new();
    for j in 0..grid.ny - 1 {
        for i in 0..grid.nx - 1 {
            let bl = grid.inside(i, j);
            let br = grid.inside(i + 1, j);
            let tr = grid.inside(i + 1, j + 1);
            let tl = grid.inside(i, j + 1);
            let case = (bl as u8) | (br as u8) << 1 | (tr as u8) << 2 | (tl as u8) << 3;
            let bottom = EdgeId::H(i, j);
            let right = EdgeId::V(i + 1, j);
            let top = EdgeId::H(i, j + 1);
            let left = EdgeId::V(i, j);
            match case {
                0 | 15 => {}
                1 | 14 => segments.push((left, bottom)),
                2 | 13 => segments.push((bottom, right)),
                3 | 12 => segments.push((left, right)),
                4 | 11 => segments.push((right, top)),
                6 | 9 => segments.push((bottom, top)),
                7 | 8 => segments.push((top, left)),
                5 | 10 => {
                    // Saddle: resolve with the cell centre.
                    let centre = grid.node(i, j) + Complex64::new(0.5 * grid.dx, 0.5 * grid.dy);
                    let centre_inside = grid.residual(centre) > 0.0;
                    if centre_inside == bl {
                        // bl and tr are connected through the centre.
                        segments.push((left, top));
                        segments.push((bottom, right));
                    } else {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    segments
}

/// Joins segments sharing an edge into chains. Interior edges are shared by
/// exactly two segments; border edges by one, so those start open chains.
fn link_segments(segments: &[(EdgeId, EdgeId)]) -> Vec<(Vec<EdgeId>, bool)> {
    let mut incident: HashMap<EdgeId, Vec<usize>> = HashMap::new();
    for (k, (a, b)) in segments.iter().enumerate() {
        incident.entry(*a).or_default().push(k);
        incident.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut chains = Vec::new();

    let walk = |start_edge: EdgeId, first: usize, used: &mut Vec<bool>| -> (Vec<EdgeId>, bool) {
        let mut edges = vec![start_edge];
        let mut current_edge = start_edge;
        let mut seg = first;
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            let next_edge = if a == current_edge { b } else { a };
            if next_edge == start_edge {
                return (edges, true);
            }
            edges.push(next_edge);
            current_edge = next_edge;
            match incident[&next_edge].iter().find(|&&s| !used[s]) {
                Some(&s) => seg = s,
                None => return (edges, false),
            }
        }
    };

    // Open chains first, starting from border edges.
    let mut border: Vec<(&EdgeId, &Vec<usize>)> =
        incident.iter().filter(|(_, segs)| segs.len() == 1).collect();
    border.sort_by_key(|(e, _)| edge_order(e));
    for (edge, segs) in border {
        if !used[segs[0]] {
            chains.push(walk(*edge, segs[0], &mut used));
        }
    }
    for k in 0..segments.len() {
        if !used[k] {
            chains.push(walk(segments[k].0, k, &mut used));
        }
    }
    chains
}

fn edge_order(e: &EdgeId) -> (usize, usize, usize) {
    match *e {
        EdgeId::H(i, j) => (j, i, 0),
        EdgeId::V(i, j) => (j, i, 1),
    }
}
