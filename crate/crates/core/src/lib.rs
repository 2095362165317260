pub mod complexes;
pub mod coxeter;
pub mod perm;
pub mod geometry;
pub mod universal;
pub mod bmw;
pub mod construction;
pub mod cli;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/permutations.md")]
    mod permutations {}
    #[doc = include_str!("../../../book/src/odd_graphs.md")]
    mod odd_graphs {}
    #[doc = include_str!("../../../book/src/davis_balls.md")]
    mod davis_balls {}
    #[doc = include_str!("../../../book/src/universal.md")]
    mod universal {}
    #[doc = include_str!("../../../book/src/bmw.md")]
    mod bmw {}
    #[doc = include_str!("../../../book/src/lattices.md")]
    mod lattices {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
