//! Interactive sub-protocols over shares: multiplication, truncation,
//! comparison, selection and iterative elementary-function approximations.

mod approx;
mod compare;
mod mul;
mod triples;
mod trunc;

pub use approx::{
    exp_approx, recip_approx, rsqrt_approx, EXP_DOMAIN, EXP_SQUARINGS, RECIP_DOMAIN, RECIP_ITERS,
    RSQRT_DOMAIN, RSQRT_ITERS,
};
pub use compare::{
    argmax_last_axis, argmax_onehot, less_than, max_last_axis, select, BinaryShare,
};
pub use mul::{matmul, mul, reshare, reveal};
pub use triples::{deal_triples, mul_with_triples, TripleStore};
pub use trunc::trunc;
