//! Seeded synthetic corpora.
//!
//! Texts mix narrative and argumentative sentences according to a latent
//! narrativity, so n-gram classifiers can recover it. Annotators add their
//! own strictness and noise on top of the latent values.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::json;

use crate::corpus::{
    ingest_annotations, AnnotationStore, AuthorRole, CommentRecord, CommentTable, Feature,
    ScoredComment,
};
use crate::error::Result;
use crate::inference::design::{zscore, DesignMatrix, Grouping};
use crate::inference::logistic::sigmoid;
use crate::scoring::cv::CvItem;

const TIMES: [&str; 8] = [
    "Last summer",
    "Years ago",
    "When I was a kid",
    "One night",
    "Yesterday",
    "Back in college",
    "Once",
    "A few weeks ago",
];
const SUBJECTS: [&str; 8] = [
    "my brother",
    "my grandmother",
    "I",
    "a friend of mine",
    "my neighbor",
    "my dad",
    "my roommate",
    "we",
];
const ACTIONS: [&str; 10] = [
    "drove to the coast",
    "lost my wallet at the station",
    "walked into the hospital",
    "got a call from the police",
    "found an old letter",
    "missed the last train home",
    "opened the door and froze",
    "moved to a new city",
    "told me what happened",
    "waited outside for hours",
];
const AFTERS: [&str; 6] = [
    "and then everything changed",
    "and suddenly nobody spoke",
    "and I still remember the smell",
    "before anyone could explain",
    "and we never found out why",
    "until the storm finally passed",
];
const CLAIMS: [&str; 12] = [
    "The evidence suggests the policy reduces costs.",
    "Studies show that taxes on sugar change behavior.",
    "Therefore the argument does not hold in general.",
    "Economists broadly agree on this point.",
    "The data do not support that conclusion.",
    "A market solution would be more efficient.",
    "This view ignores the incentives involved.",
    "In principle the state should remain neutral.",
    "Statistically the effect is small and uncertain.",
    "The definition you use is too narrow.",
    "Regulation tends to favor large incumbents.",
    "Your premise assumes what it tries to prove.",
];

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Text whose share of narrative sentences tracks `narrativity` in [0, 1].
pub fn synthetic_text(rng: &mut ChaCha8Rng, narrativity: f64) -> String {
    let sentences = rng.random_range(3..=7);
    let mut out = Vec::with_capacity(sentences);
    for _ in 0..sentences {
        if rng.random::<f64>() < narrativity {
            let s = format!(
                "{} {} {} {}.",
                TIMES.choose(rng).unwrap(),
                SUBJECTS.choose(rng).unwrap(),
                ACTIONS.choose(rng).unwrap(),
                AFTERS.choose(rng).unwrap()
            );
            out.push(s);
        } else {
            out.push(CLAIMS.choose(rng).unwrap().to_string());
        }
    }
    out.join(" ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub items: usize,
    pub seed: u64,
    pub story_annotators: usize,
    pub text_annotators: usize,
    pub reader_annotators: usize,
    /// Share of items drawn from the story-like latent component.
    pub story_rate: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            items: 620,
            seed: 0,
            story_annotators: 7,
            text_annotators: 3,
            reader_annotators: 4,
            story_rate: 0.43,
        }
    }
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

fn likert(rng: &mut ChaCha8Rng, latent: f64, bias: f64) -> i64 {
    (1.0 + 4.0 * latent + bias + 0.6 * normal(rng))
        .round()
        .clamp(1.0, 5.0) as i64
}

/// Annotation JSONL lines. Story annotators split into a lenient and a strict
/// group; text and reader features get their own annotator pools.
pub fn annotation_lines(spec: &CorpusSpec) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let thresholds: Vec<f64> = (0..spec.story_annotators)
        .map(|a| {
            if a % 2 == 0 {
                0.38 + 0.02 * a as f64
            } else {
                0.55 + 0.02 * a as f64
            }
        })
        .collect();
    let text_bias: Vec<f64> = (0..spec.text_annotators)
        .map(|_| 0.3 * normal(&mut rng))
        .collect();
    let reader_bias: Vec<f64> = (0..spec.reader_annotators)
        .map(|_| 0.3 * normal(&mut rng))
        .collect();
    let mut lines = Vec::new();
    for i in 0..spec.items {
        let id = format!("item{i:04}");
        let story_like = rng.random::<f64>() < spec.story_rate;
        let s = clamp01(if story_like { 0.72 } else { 0.22 } + 0.15 * normal(&mut rng));
        let text = synthetic_text(&mut rng, s);
        let mut first = true;
        let mut push = |annotator: String,
                        feature: Feature,
                        rating: i64,
                        lines: &mut Vec<String>| {
            let mut v = json!({"item_id": id, "annotator_id": annotator, "feature": feature, "rating": rating});
            if first {
                v["text"] = json!(text);
                first = false;
            }
            lines.push(v.to_string());
        };
        for (a, thr) in thresholds.iter().enumerate() {
            let r = i64::from(s + 0.1 * normal(&mut rng) > *thr);
            push(format!("s{}", a + 1), Feature::Story, r, &mut lines);
        }
        for f in [
            Feature::Agency,
            Feature::EventSequencing,
            Feature::WorldMaking,
        ] {
            let spread = if f == Feature::WorldMaking { 0.3 } else { 0.12 };
            let latent = clamp01(s + spread * normal(&mut rng));
            for (a, b) in text_bias.iter().enumerate() {
                let r = likert(&mut rng, latent, *b);
                push(format!("t{}", a + 1), f, r, &mut lines);
            }
        }
        for f in [Feature::Suspense, Feature::Curiosity, Feature::Surprise] {
            let latent = clamp01(0.8 * s + 0.1 + 0.15 * normal(&mut rng));
            for (a, b) in reader_bias.iter().enumerate() {
                let r = likert(&mut rng, latent, *b);
                push(format!("r{}", a + 1), f, r, &mut lines);
            }
        }
    }
    lines
}

pub fn annotated_corpus(spec: &CorpusSpec) -> AnnotationStore {
    let text = annotation_lines(spec).join("\n");
    ingest_annotations(text.as_bytes()).expect("synthetic annotations are valid")
}

/// Training items for `feature`: soft label plus binarized mean.
pub fn cv_items(store: &AnnotationStore, feature: Feature) -> Result<Vec<CvItem>> {
    crate::scoring::cv::items_from_store(store, feature)
}

/// Story items rated by `annotators` exchangeable annotators who each say
/// "story" with an item-specific probability.
pub fn annotator_noise_items(items: usize, annotators: usize, seed: u64) -> Vec<CvItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..items)
        .map(|i| {
            let p = clamp01(rng.random::<f64>());
            let text = synthetic_text(&mut rng, p);
            let yes = (0..annotators).filter(|_| rng.random::<f64>() < p).count() as i64;
            let ratings: Vec<i64> = (0..annotators as i64).map(|a| i64::from(a < yes)).collect();
            let target = crate::corpus::soft_label(&ratings, &[0, 1]).expect("ratings on support");
            CvItem {
                id: format!("n{i:05}"),
                text,
                label: target.expected() >= 0.5,
                target,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreadSpec {
    pub comments: usize,
    pub threads: usize,
    pub authors: usize,
    pub seed: u64,
}

impl Default for ThreadSpec {
    fn default() -> Self {
        Self {
            comments: 200,
            threads: 20,
            authors: 40,
            seed: 0,
        }
    }
}

/// Discussion JSONL lines. Each thread has a root post; one thread is opened
/// by a moderator, and a few replies come from moderators, system accounts or
/// deleted users. Deltas are more likely for narrative and longer comments.
pub fn thread_lines(spec: &ThreadSpec) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let author_effect: Vec<f64> = (0..spec.authors).map(|_| 0.5 * normal(&mut rng)).collect();
    let mut lines = Vec::new();
    let mut emitted = 0;
    for t in 0..spec.threads {
        let thread_id = format!("t{t:03}");
        let mod_thread = t == spec.threads - 1;
        let op = if mod_thread {
            "AutoModerator".to_string()
        } else {
            format!("op{t:03}")
        };
        let root_role = if mod_thread { "moderator" } else { "user" };
        let root_text = synthetic_text(&mut rng, 0.2);
        lines.push(
            json!({"comment_id": thread_id, "thread_id": thread_id, "author_id": op, "op_author_id": op,
                   "author_role": root_role, "delta_awarded": false, "text": root_text})
            .to_string(),
        );
        emitted += 1;
        let remaining_threads = spec.threads - t;
        let replies = (spec.comments.saturating_sub(emitted)) / remaining_threads;
        for r in 0..replies {
            let a = rng.random_range(0..spec.authors);
            let (author, role) = match (r + t) % 23 {
                5 => ("[deleted]".to_string(), "deleted"),
                11 => ("ModTeam".to_string(), "moderator"),
                17 => ("DeltaBot".to_string(), "system"),
                _ => (format!("u{a:03}"), "user"),
            };
            let s = clamp01(rng.random::<f64>());
            let text = synthetic_text(&mut rng, s);
            let words = text.split_whitespace().count() as f64;
            let eta = -2.2 + 2.0 * s + 0.03 * (words - 40.0) + author_effect[a];
            let delta = role == "user" && rng.random::<f64>() < sigmoid(eta);
            lines.push(
                json!({"comment_id": format!("{thread_id}_c{r:03}"), "thread_id": thread_id, "author_id": author,
                       "op_author_id": op, "author_role": role, "delta_awarded": delta, "text": text})
                .to_string(),
            );
            emitted += 1;
        }
    }
    lines
}

/// Crossed random-intercept logistic data: `n` rows spread evenly over
/// `authors`, OPs drawn uniformly, one standard-normal predictor.
pub struct GlmmData {
    pub y: Vec<bool>,
    pub design: DesignMatrix,
    pub groups: Vec<Grouping>,
}

pub fn glmm_data(
    n: usize,
    authors: usize,
    ops: usize,
    beta: (f64, f64),
    sigma_author: f64,
    sigma_op: f64,
    seed: u64,
) -> GlmmData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a_eff: Vec<f64> = (0..authors)
        .map(|_| sigma_author * normal(&mut rng))
        .collect();
    let o_eff: Vec<f64> = (0..ops).map(|_| sigma_op * normal(&mut rng)).collect();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut a_lab = Vec::with_capacity(n);
    let mut o_lab = Vec::with_capacity(n);
    for i in 0..n {
        let a = i * authors / n;
        let o = rng.random_range(0..ops);
        let xi: f64 = normal(&mut rng);
        let eta = beta.0 + beta.1 * xi + a_eff[a] + o_eff[o];
        y.push(rng.random::<f64>() < sigmoid(eta));
        x.push(xi);
        a_lab.push(format!("a{a:05}"));
        o_lab.push(format!("o{o:05}"));
    }
    GlmmData {
        y,
        design: DesignMatrix::with_intercept(&[("x".into(), x)]).expect("valid design"),
        groups: vec![
            Grouping::from_labels("Author", &a_lab).expect("non-empty"),
            Grouping::from_labels("OPAuthor", &o_lab).expect("non-empty"),
        ],
    }
}

/// True fixed effects on standardized predictors for [`m5_corpus`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct M5Effects {
    pub intercept: f64,
    pub structural: f64,
    pub response: f64,
    pub length: f64,
    pub sigma_author: f64,
    pub sigma_op: f64,
}

impl Default for M5Effects {
    fn default() -> Self {
        Self {
            intercept: -1.5,
            structural: 0.1,
            response: 0.6,
            length: 0.3,
            sigma_author: 0.5,
            sigma_op: 0.3,
        }
    }
}

/// Scored comments and their discussion records generated from the
/// composite-score persuasion model itself.
pub fn m5_corpus(
    n: usize,
    authors: usize,
    ops: usize,
    effects: M5Effects,
    seed: u64,
) -> (Vec<ScoredComment>, CommentTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a_eff: Vec<f64> = (0..authors)
        .map(|_| effects.sigma_author * normal(&mut rng))
        .collect();
    let o_eff: Vec<f64> = (0..ops)
        .map(|_| effects.sigma_op * normal(&mut rng))
        .collect();
    let mut scored = Vec::with_capacity(n);
    let mut meta = Vec::with_capacity(n);
    for i in 0..n {
        let s = clamp01(rng.random::<f64>());
        let mut scores = BTreeMap::new();
        for f in Feature::SCORED {
            let v = (1.0 + 4.0 * clamp01(s + 0.25 * normal(&mut rng))).clamp(1.0, 5.0);
            scores.insert(f, v);
        }
        let id = format!("m{i:06}");
        scored.push(ScoredComment::new(id.clone(), s, scores).expect("scores in range"));
        let words = 20 + rng.random_range(0..200usize);
        meta.push((
            id,
            rng.random_range(0..authors),
            rng.random_range(0..ops),
            words,
        ));
    }
    let z = |v: Vec<f64>| zscore("v", &v).expect("non-constant").0;
    let zs = z(scored.iter().map(|s| s.structural_score).collect());
    let zr = z(scored.iter().map(|s| s.response_score).collect());
    let zl = z(meta.iter().map(|m| m.3 as f64).collect());
    let mut comments = Vec::with_capacity(n);
    for (i, (id, a, o, words)) in meta.into_iter().enumerate() {
        let eta = effects.intercept
            + effects.structural * zs[i]
            + effects.response * zr[i]
            + effects.length * zl[i]
            + a_eff[a]
            + o_eff[o];
        comments.push(CommentRecord {
            comment_id: id.clone(),
            thread_id: format!("th{o:05}"),
            author_id: format!("u{a:05}"),
            op_author_id: format!("op{o:05}"),
            author_role: AuthorRole::User,
            delta_awarded: rng.random::<f64>() < sigmoid(eta),
            text: String::new(),
            text_length: words,
        });
    }
    (
        scored,
        CommentTable {
            comments,
            excluded: 0,
            unknown_thread_warnings: 0,
        },
    )
}
