//! Site snapshots, page-type classification, and new-page coverage evaluation.
//!
//! The crate is organized around [`snapshot::SiteSnapshot`], an immutable
//! record of one breadth-first crawl of a website. Everything else derives
//! from it: the [`crawler`] produces snapshots, [`extract`] turns raw HTML
//! into titles, body text, links and publish dates, [`classify`] labels each
//! page as an index page or a content page, [`annotate`] derives gold labels
//! from content listing pages, and [`eval`] measures classification quality
//! and how well classifier-selected seed pages cover newly published pages.

pub mod annotate;
pub mod classify;
pub mod crawler;
pub mod eval;
pub mod extract;
pub mod snapshot;

pub use snapshot::{
    build_link_graph, load_snapshot, save_snapshot, HtmlSink, HtmlStore, LinkGraph,
    MemoryHtmlStore, PageRecord, PageType, ReviewStatus, SiteSnapshot, SnapshotError,
};
