//! Block-diagram interconnection of SISO state-space blocks.
//!
//! Every block input is a weighted sum of block outputs and external
//! inputs. Feedthrough terms form an algebraic loop which is solved once
//! at build time, yielding a single state-space model of the whole
//! diagram plus maps from state and external input to every block signal.

use nalgebra::DVector;

use super::linalg::{self, Mat};
use super::ss::StateSpace;
use super::tf::Domain;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InputId(pub usize);

#[derive(Clone, Debug)]
struct BlockSpec {
    name: String,
    sys: StateSpace,
    reset: Option<Mat>,
}

/// Builder for a block diagram.
#[derive(Clone, Debug)]
pub struct Interconnection {
    domain: Domain,
    blocks: Vec<BlockSpec>,
    inputs: Vec<String>,
    links: Vec<(usize, usize, f64)>,
    feeds: Vec<(usize, usize, f64)>,
}

/// Placement of one block inside the assembled state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockInfo {
    pub name: String,
    pub offset: usize,
    pub order: usize,
    pub reset: Option<Mat>,
}

/// Assembled diagram: `x' = A x + B w`, block inputs `u = K x + L w`,
/// block outputs `y = Cb x + Db u`.
#[derive(Clone, Debug)]
pub struct Network {
    pub domain: Domain,
    pub a: Mat,
    pub b: Mat,
    pub k: Mat,
    pub l: Mat,
    pub cb: Mat,
    pub db: Vec<f64>,
    pub blocks: Vec<BlockInfo>,
    pub inputs: Vec<String>,
}

impl Interconnection {
    pub fn new(domain: Domain) -> Self {
        Interconnection {
            domain,
            blocks: Vec::new(),
            inputs: Vec::new(),
            links: Vec::new(),
            feeds: Vec::new(),
        }
    }

    fn push(&mut self, name: &str, sys: StateSpace, reset: Option<Mat>) -> Result<BlockId> {
        if sys.inputs() != 1 || sys.outputs() != 1 {
            return Err(Error::Dimension(format!("block `{name}` is not SISO")));
        }
        let static_block = sys.order() == 0;
        if !static_block {
            self.domain.check_same(&sys.domain, name)?;
        }
        if let Some(r) = &reset {
            if r.nrows() != sys.order() || r.ncols() != sys.order() {
                return Err(Error::Dimension(format!(
                    "reset matrix of `{name}` must be {0}x{0}",
                    sys.order()
                )));
            }
        }
        if self.blocks.iter().any(|b| b.name == name) {
            return Err(Error::InvalidParameter(format!("duplicate block `{name}`")));
        }
        self.blocks.push(BlockSpec {
            name: name.to_string(),
            sys,
            reset,
        });
        Ok(BlockId(self.blocks.len() - 1))
    }

    pub fn add_block(&mut self, name: &str, sys: StateSpace) -> Result<BlockId> {
        self.push(name, sys, None)
    }

    /// Block whose states jump `x ← reset · x` when its input crosses zero.
    pub fn add_reset_block(&mut self, name: &str, sys: StateSpace, reset: Mat) -> Result<BlockId> {
        self.push(name, sys, Some(reset))
    }

    pub fn add_input(&mut self, name: &str) -> InputId {
        self.inputs.push(name.to_string());
        InputId(self.inputs.len() - 1)
    }

    /// Add `gain · output(src)` to the input of `dst`.
    pub fn connect(&mut self, src: BlockId, dst: BlockId, gain: f64) -> &mut Self {
        self.links.push((dst.0, src.0, gain));
        self
    }

    /// Add `gain · w[input]` to the input of `dst`.
    pub fn feed(&mut self, input: InputId, dst: BlockId, gain: f64) -> &mut Self {
        self.feeds.push((dst.0, input.0, gain));
        self
    }

    pub fn build(&self) -> Result<Network> {
        let nb = self.blocks.len();
        let ni = self.inputs.len();
        let mut m = Mat::zeros(nb, nb);
        let mut nmat = Mat::zeros(nb, ni);
        for &(dst, src, g) in &self.links {
            m[(dst, src)] += g;
        }
        for &(dst, inp, g) in &self.feeds {
            nmat[(dst, inp)] += g;
        }
        let orders: Vec<usize> = self.blocks.iter().map(|b| b.sys.order()).collect();
        let n: usize = orders.iter().sum();
        let a_blocks: Vec<&Mat> = self.blocks.iter().map(|b| &b.sys.a).collect();
        let a0 = linalg::block_diag(&a_blocks);
        let mut bb = Mat::zeros(n, nb);
        let mut cb = Mat::zeros(nb, n);
        let db: Vec<f64> = self.blocks.iter().map(|b| b.sys.d[(0, 0)]).collect();
        let mut infos = Vec::with_capacity(nb);
        let mut off = 0;
        for (i, b) in self.blocks.iter().enumerate() {
            let k = orders[i];
            bb.view_mut((off, i), (k, 1)).copy_from(&b.sys.b);
            cb.view_mut((i, off), (1, k)).copy_from(&b.sys.c);
            infos.push(BlockInfo {
                name: b.name.clone(),
                offset: off,
                order: k,
                reset: b.reset.clone(),
            });
            off += k;
        }
        let dbm = Mat::from_diagonal(&DVector::from_vec(db.clone()));
        let g = Mat::identity(nb, nb) - &m * &dbm;
        let ginv = linalg::inverse(&g).map_err(|_| Error::Singular("ill-posed algebraic loop".into()))?;
        let k = &ginv * &m * &cb;
        let l = &ginv * &nmat;
        let a = a0 + &bb * &k;
        let b = &bb * &l;
        Ok(Network {
            domain: self.domain,
            a,
            b,
            k,
            l,
            cb,
            db,
            blocks: infos,
            inputs: self.inputs.clone(),
        })
    }
}

impl Network {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        self.blocks
            .iter()
            .position(|b| b.name == name)
            .ok_or_else(|| Error::Unknown(name.to_string()))
    }

    /// Row map of a block's output: `y_i = c x + d w`.
    pub fn output_map(&self, block: usize) -> (Mat, Mat) {
        let c = self.cb.rows(block, 1) + self.k.rows(block, 1) * self.db[block];
        let d = self.l.rows(block, 1) * self.db[block];
        (c.into_owned(), d.into_owned())
    }

    /// Row map of a block's input: `u_i = k x + l w`.
    pub fn input_map(&self, block: usize) -> (Mat, Mat) {
        (self.k.rows(block, 1).into_owned(), self.l.rows(block, 1).into_owned())
    }

    /// Diagonal-or-general reset map over the full state: identity except
    /// on the states of reset blocks.
    pub fn reset_map(&self) -> Mat {
        let n = self.order();
        let mut r = Mat::identity(n, n);
        for b in &self.blocks {
            if let Some(m) = &b.reset {
                r.view_mut((b.offset, b.offset), (b.order, b.order)).copy_from(m);
            }
        }
        r
    }

    /// Closed state-space model from the external inputs to one block's output.
    pub fn to_state_space(&self, output_block: usize) -> Result<StateSpace> {
        let (c, d) = self.output_map(output_block);
        StateSpace::new(self.a.clone(), self.b.clone(), c, d, self.domain)
    }

    pub fn block_inputs(&self, x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        &self.k * x + &self.l * w
    }

    pub fn block_outputs(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut y = &self.cb * x;
        for i in 0..y.len() {
            y[i] += self.db[i] * u[i];
        }
        y
    }
}
