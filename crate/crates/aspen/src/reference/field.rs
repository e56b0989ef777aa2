//! The sampled solution field and its binary cache format.

use num_complex::Complex64;
use std::io::{Read, Write};
use std::path::Path;

use super::Scheme;

/// Complex-valued solution on a uniform (x, t) grid. Snapshots are stored
/// time-major: `values[it * nx + ix]`, so each time slice is a contiguous
/// spatial row.
#[derive(Clone, Debug)]
pub struct Field {
    pub nx: usize,
    pub nt: usize,
    pub x_domain: (f64, f64),
    pub t_domain: (f64, f64),
    /// Periodic grids exclude the right endpoint; Dirichlet grids include it.
    pub periodic: bool,
    pub scheme: Scheme,
    /// Requested integration step (the realized substep is ≤ this).
    pub dt: f64,
    /// Governing-equation parameters (b, c) the run used.
    pub pde_params: (f64, f64),
    pub values: Vec<Complex64>,
}

impl Field {
    pub fn dx(&self) -> f64 {
        let span = self.x_domain.1 - self.x_domain.0;
        if self.periodic {
            span / self.nx as f64
        } else {
            span / (self.nx as f64 - 1.0)
        }
    }

    pub fn x_at(&self, ix: usize) -> f64 {
        self.x_domain.0 + self.dx() * ix as f64
    }

    pub fn t_at(&self, it: usize) -> f64 {
        let dt = (self.t_domain.1 - self.t_domain.0) / (self.nt as f64 - 1.0);
        self.t_domain.0 + dt * it as f64
    }

    /// Spatial slice at snapshot `it` (contiguous).
    pub fn slice_t(&self, it: usize) -> &[Complex64] {
        &self.values[it * self.nx..(it + 1) * self.nx]
    }

    /// Linear interpolation in x within one snapshot.
    pub fn interp_x(&self, it: usize, x: f64) -> Complex64 {
        let row = self.slice_t(it);
        let dx = self.dx();
        let pos = (x - self.x_domain.0) / dx;
        let i0 = (pos.floor() as isize).clamp(0, self.nx as isize - 2) as usize;
        let frac = (pos - i0 as f64).clamp(0.0, 1.0);
        row[i0] * (1.0 - frac) + row[i0 + 1] * frac
    }

    pub fn save(&self, path: &Path) -> Result<(), FieldIoError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(MAGIC)?;
        write_u64(&mut f, self.nx as u64)?;
        write_u64(&mut f, self.nt as u64)?;
        for v in [
            self.x_domain.0,
            self.x_domain.1,
            self.t_domain.0,
            self.t_domain.1,
            self.dt,
            self.pde_params.0,
            self.pde_params.1,
        ] {
            write_f64(&mut f, v)?;
        }
        write_u64(&mut f, self.periodic as u64)?;
        write_u64(&mut f, matches!(self.scheme, Scheme::SplitStepFourier) as u64)?;
        for v in &self.values {
            write_f64(&mut f, v.re)?;
            write_f64(&mut f, v.im)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, FieldIoError> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        f.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(FieldIoError::BadMagic);
        }
        let nx = read_u64(&mut f)? as usize;
        let nt = read_u64(&mut f)? as usize;
        let mut vals = [0.0; 7];
        for v in vals.iter_mut() {
            *v = read_f64(&mut f)?;
        }
        let periodic = read_u64(&mut f)? != 0;
        let scheme = if read_u64(&mut f)? != 0 {
            Scheme::SplitStepFourier
        } else {
            Scheme::CrankNicolsonFd
        };
        if nx.checked_mul(nt).is_none() || nx * nt > (1 << 32) {
            return Err(FieldIoError::BadShape);
        }
        let mut values = Vec::with_capacity(nx * nt);
        for _ in 0..nx * nt {
            let re = read_f64(&mut f)?;
            let im = read_f64(&mut f)?;
            values.push(Complex64::new(re, im));
        }
        Ok(Field {
            nx,
            nt,
            x_domain: (vals[0], vals[1]),
            t_domain: (vals[2], vals[3]),
            periodic,
            scheme,
            dt: vals[4],
            pde_params: (vals[5], vals[6]),
            values,
        })
    }
}

const MAGIC: &[u8; 8] = b"ASPNFLD1";

#[derive(Debug, thiserror::Error)]
pub enum FieldIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a field cache file")]
    BadMagic,
    #[error("implausible field shape in cache file")]
    BadShape,
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_f64<W: Write>(w: &mut W, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
