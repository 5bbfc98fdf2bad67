//! The guide under `book/` compiled as doctests, one module per chapter so
//! a failing listing points at its chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/forms.md")]
pub mod forms {}
#[doc = include_str!("../../../book/src/monodromy.md")]
pub mod monodromy {}
#[doc = include_str!("../../../book/src/propellers.md")]
pub mod propellers {}
#[doc = include_str!("../../../book/src/surgery.md")]
pub mod surgery {}
#[doc = include_str!("../../../book/src/cone.md")]
pub mod cone {}
#[doc = include_str!("../../../book/src/flows.md")]
pub mod flows {}
#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios {}
