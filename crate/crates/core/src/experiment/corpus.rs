//! Synthetic post streams and their line-delimited file format.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::contest::Post;
use crate::error::{Error, Result};

pub const MIN_TOKENS: u32 = 5;
pub const MAX_TOKENS: u32 = 30;

/// `n_posts` posts with token counts uniform on `[5, 30]` and entity counts
/// Poisson with mean `mean_entities`, capped at the token count.
pub fn generate_corpus<R: Rng + ?Sized>(
    n_posts: u64,
    rng: &mut R,
    mean_entities: f64,
) -> Result<Vec<Post>> {
    if n_posts == 0 {
        return Err(Error::Config("corpus needs at least one post".into()));
    }
    let poisson = Poisson::new(mean_entities)
        .map_err(|e| Error::Config(format!("mean_entities {mean_entities}: {e}")))?;
    (0..n_posts)
        .map(|i| {
            let tokens = rng.random_range(MIN_TOKENS..=MAX_TOKENS);
            let entities = (poisson.sample(rng) as u32).min(tokens);
            Post::new(i, tokens, entities, i)
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusRecord {
    id: u64,
    token_count: u32,
    expected_entities: u32,
}

pub fn write_corpus_jsonl<W: Write>(posts: &[Post], mut out: W) -> Result<()> {
    for p in posts {
        let rec = CorpusRecord {
            id: p.id.0,
            token_count: p.token_count,
            expected_entities: p.expected_entities,
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Read a corpus; arrival order is line order.
pub fn read_corpus_jsonl<R: BufRead>(input: R) -> Result<Vec<Post>> {
    let mut posts = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Input(format!("corpus line {}: {e}", i + 1)))?;
        let arrival = posts.len() as u64;
        posts.push(Post::new(
            rec.id,
            rec.token_count,
            rec.expected_entities,
            arrival,
        )?);
    }
    Ok(posts)
}
