use super::fd::FdOp;
use super::spectral::Fourier;
use crate::error::{Error, Result};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stretching {
    Uniform,
    /// y_j = L (1 - tanh(β(1 - s_j)) / tanh β), clustered at y = 0.
    Tanh { beta: f64 },
}

impl Stretching {
    pub fn code(&self) -> u32 {
        match self {
            Stretching::Uniform => 0,
            Stretching::Tanh { .. } => 1,
        }
    }

    pub fn beta(&self) -> f64 {
        match self {
            Stretching::Uniform => 0.0,
            Stretching::Tanh { beta } => *beta,
        }
    }

    pub fn from_code(code: u32, beta: f64) -> Result<Self> {
        match code {
            0 => Ok(Stretching::Uniform),
            1 => Ok(Stretching::Tanh { beta }),
            c => Err(Error::Format(format!("unknown stretching code {c}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridKind {
    /// Physical strip 𝕋 × [0, Ly].
    Physical,
    /// Layer strip 𝕋 × [0, Lη] in the fast variable, uniform spacing.
    Layer,
}

impl GridKind {
    pub fn code(&self) -> u32 {
        match self {
            GridKind::Physical => 0,
            GridKind::Layer => 1,
        }
    }
}

/// Tensor grid: periodic x on [0, 2π) times a stretched wall-normal line.
#[derive(Debug)]
pub struct Grid {
    pub kind: GridKind,
    pub nx: usize,
    pub ny: usize,
    pub length: f64,
    pub stretching: Stretching,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Trapezoidal weights in y.
    pub wy: Vec<f64>,
    pub fourier: Fourier,
    ops: [FdOp; 4],
}

pub type Grid2D = Grid;
pub type BLGrid = Grid;

impl Grid {
    pub fn new(
        kind: GridKind,
        nx: usize,
        ny: usize,
        length: f64,
        stretching: Stretching,
    ) -> Result<Arc<Grid>> {
        if nx < 8 || !nx.is_power_of_two() {
            return Err(Error::Grid(format!("nx={nx} must be a power of two >= 8")));
        }
        if ny < 8 {
            return Err(Error::Grid(format!("ny={ny} must be >= 8")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Grid(format!("length {length} must be positive")));
        }
        if kind == GridKind::Layer && stretching != Stretching::Uniform {
            return Err(Error::Grid("layer grids are uniform in eta".into()));
        }
        let y: Vec<f64> = match stretching {
            Stretching::Uniform => (0..ny)
                .map(|j| length * j as f64 / (ny - 1) as f64)
                .collect(),
            Stretching::Tanh { beta } => {
                if !(beta > 0.0 && beta.is_finite()) {
                    return Err(Error::Grid(format!("tanh beta {beta} must be positive")));
                }
                let tb = beta.tanh();
                (0..ny)
                    .map(|j| {
                        let s = j as f64 / (ny - 1) as f64;
                        length * (1.0 - (beta * (1.0 - s)).tanh() / tb)
                    })
                    .collect()
            }
        };
        let mut y = y;
        y[0] = 0.0;
        y[ny - 1] = length;
        if y.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Grid("y coordinates not strictly increasing".into()));
        }
        let mut wy = vec![0.0; ny];
        for j in 0..ny - 1 {
            let h = y[j + 1] - y[j];
            wy[j] += 0.5 * h;
            wy[j + 1] += 0.5 * h;
        }
        let x = (0..nx).map(|i| 2.0 * PI * i as f64 / nx as f64).collect();
        let ops = [
            FdOp::new(&y, 1, 2),
            FdOp::new(&y, 2, 2),
            FdOp::new(&y, 1, 4),
            FdOp::new(&y, 2, 4),
        ];
        Ok(Arc::new(Grid {
            kind,
            nx,
            ny,
            length,
            stretching,
            x,
            y,
            wy,
            fourier: Fourier::new(nx),
            ops,
        }))
    }

    pub fn physical(nx: usize, ny: usize, ly: f64, stretching: Stretching) -> Result<Arc<Grid>> {
        Grid::new(GridKind::Physical, nx, ny, ly, stretching)
    }

    pub fn layer(nx: usize, neta: usize, leta: f64) -> Result<Arc<Grid>> {
        Grid::new(GridKind::Layer, nx, neta, leta, Stretching::Uniform)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI / self.nx as f64
    }

    pub fn dy0(&self) -> f64 {
        self.y[1] - self.y[0]
    }

    /// Uniform spacing of a layer grid.
    pub fn deta(&self) -> f64 {
        self.length / (self.ny - 1) as f64
    }

    /// Differentiation operator in y. `order` is 2 or 4.
    pub fn op(&self, deriv: usize, order: usize) -> Result<&FdOp> {
        let need = FdOp::width_needed(deriv, order);
        if self.ny < need {
            return Err(Error::StencilTooWide {
                need,
                have: self.ny,
            });
        }
        let o = match order {
            2 => 0,
            4 => 2,
            _ => return Err(Error::Grid(format!("unsupported FD order {order}"))),
        };
        match deriv {
            1 | 2 => Ok(&self.ops[o + deriv - 1]),
            _ => Err(Error::Grid(format!("unsupported derivative {deriv}"))),
        }
    }

    /// Infallible accessors for the operators every solver uses.
    pub fn d1(&self) -> &FdOp {
        &self.ops[2]
    }
    pub fn d2(&self) -> &FdOp {
        &self.ops[3]
    }
    pub fn d1o2(&self) -> &FdOp {
        &self.ops[0]
    }
    pub fn d2o2(&self) -> &FdOp {
        &self.ops[1]
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.kind == other.kind
            && self.nx == other.nx
            && self.ny == other.ny
            && self.length == other.length
            && self.stretching == other.stretching
    }
}
