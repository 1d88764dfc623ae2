//! Generates ISO/IEC 26514-structured user manuals from Eclipse e4
//! application models.
//!
//! The pipeline reads `.e4xmi` models and fragments ([`e4xmi`]), assembles a
//! product ([`merge`]), attaches semantic descriptions ([`annotations`]),
//! derives the document model ([`docmodel`]) and renders it through templates
//! ([`outputters`]) together with perspective depictions ([`depiction`]).

pub mod analyzer;
pub mod annotations;
pub mod appmodel;
pub mod cli;
pub mod depiction;
pub mod diagnostics;
pub mod docmodel;
pub mod e4xmi;
pub mod merge;
pub mod outputters;
pub mod pipeline;

pub use appmodel::{ApplicationModel, Category, ElementId, ElementKind, ModelElement, Node};
