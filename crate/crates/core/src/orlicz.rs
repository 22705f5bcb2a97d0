//! Orlicz machinery for the exponential pair: the complementary N-functions
//! P(t) = e^|t| - 1 - |t| and P*(t) = (1+|t|)ln(1+|t|) - |t|, Luxemburg and
//! Orlicz (Amemiya) norms over weighted grids, and the dyadic maximal
//! function with its L ln L norm.

pub mod luxemburg;
pub mod maximal;
pub mod nfunction;

pub use luxemburg::{
    amemiya_norm, amemiya_norm_with_scale, holder_young_pairing, luxemburg_norm, NFunc,
};
pub use maximal::{llogl_norm, maximal_eval, maximal_function, MaximalEval};
