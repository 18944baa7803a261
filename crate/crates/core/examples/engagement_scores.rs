//! Per-page engagement normalization on a handful of posts.

use std::collections::BTreeSet;

use adlens::corpus::{score_corpus, PostRecord};
use chrono::{TimeZone, Utc};

fn post(id: &str, page: &str, likes: u64, retweets: u64) -> PostRecord {
    PostRecord {
        post_id: id.into(),
        page_id: page.into(),
        image_path: format!("{id}.png").into(),
        likes,
        retweets,
        timestamp: Utc.with_ymd_and_hms(2017, 6, 1, 9, 0, 0).unwrap(),
        text: String::new(),
        external_bias_labels: BTreeSet::new(),
        followers: None,
    }
}

fn main() {
    let posts = vec![
        post("a1", "big_brand", 9_000, 1_200),
        post("a2", "big_brand", 4_000, 300),
        post("a3", "big_brand", 6_500, 800),
        post("b1", "corner_shop", 12, 3),
        post("b2", "corner_shop", 40, 9),
        post("b3", "corner_shop", 20, 2),
        // a page with one post cannot be normalized
        post("c1", "lonely_page", 100, 10),
    ];
    let scored = score_corpus(&posts);
    for page in &scored.pages {
        println!("{:<12} mu {:>9.1} sigma {:>8.1} n {}", page.page_id, page.mu, page.sigma, page.n_posts);
    }
    println!("excluded: {:?}", scored.excluded_pages);
    for p in &scored.posts {
        println!("{:<3} raw {:>6} normalized {:+.3}", p.post.post_id, p.epsilon, p.epsilon_n);
    }
}
