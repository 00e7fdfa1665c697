#![allow(dead_code)]

use metric_distill::corpus::{filter_corpus, Corpus, DatasetExample, ExclusionSet};
use metric_distill::dense::{dot_sim, CrossEncoder, DualEncoder, ModelDims, ParamSet, Vocab};
use metric_distill::metrics::{descending_order, kendall_tau, quality_order, Metric};
use metric_distill::pool::CandidatePool;
use metric_distill::training::{contrastive_loss, kl_distill_loss, list_mle_loss, LossGrad};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Contrastive,
    ListMle,
    Kl,
}

/// A random scoring problem: one query and a handful of candidates, plus
/// the loss target (an ordering or teacher scores).
pub struct GradInstance {
    pub concepts: Vec<u32>,
    pub candidates: Vec<Vec<u32>>,
    pub order: Vec<usize>,
    pub teacher: Vec<f64>,
}

pub const GRAD_VOCAB: usize = 12;
pub const GRAD_DIMS: ModelDims = ModelDims { d_emb: 5, d: 4, hidden: 6 };

pub fn grad_instance(rng: &mut ChaCha8Rng) -> GradInstance {
    let ids = |rng: &mut ChaCha8Rng, n: usize| -> Vec<u32> { (0..n).map(|_| rng.gen_range(0..GRAD_VOCAB as u32)).collect() };
    let m = rng.gen_range(1..=3);
    let concepts = ids(rng, m);
    let n = rng.gen_range(2..=5);
    let candidates = (0..n)
        .map(|_| {
            let len = rng.gen_range(1..=6);
            ids(rng, len)
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let teacher = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    GradInstance { concepts, candidates, order, teacher }
}

pub fn apply_loss(kind: LossKind, z: &[f64], inst: &GradInstance) -> LossGrad {
    match kind {
        LossKind::Contrastive => contrastive_loss(z[0], &z[1..]),
        LossKind::ListMle => list_mle_loss(z, &inst.order).unwrap(),
        LossKind::Kl => kl_distill_loss(&inst.teacher, z).unwrap(),
    }
}

fn grad_vocab() -> Vocab {
    Vocab::from((0..GRAD_VOCAB).map(|i| format!("t{i}")).collect::<Vec<_>>())
}

fn dual_loss(model: &DualEncoder, kind: LossKind, inst: &GradInstance) -> f64 {
    let q = model.concept.encode(&inst.concepts).unwrap();
    let z: Vec<f64> = inst
        .candidates
        .iter()
        .map(|c| dot_sim(&q, &model.sentence.encode(c).unwrap()).unwrap())
        .collect();
    apply_loss(kind, &z, inst).loss
}

fn dual_grad(model: &DualEncoder, kind: LossKind, inst: &GradInstance) -> Vec<f64> {
    let q = model.concept.forward(&inst.concepts).unwrap();
    let s: Vec<_> = inst.candidates.iter().map(|c| model.sentence.forward(c).unwrap()).collect();
    let z: Vec<f64> = s.iter().map(|s| dot_sim(&q.output, &s.output).unwrap()).collect();
    let lg = apply_loss(kind, &z, inst);
    let mut grad = model.zeros_like();
    let mut d_q = vec![0.0; model.dim()];
    for (s, g) in s.iter().zip(&lg.grad) {
        for (d, v) in d_q.iter_mut().zip(&s.output) {
            *d += g * v;
        }
        let d_s: Vec<f64> = q.output.iter().map(|v| g * v).collect();
        model.sentence.backward(s, &d_s, &mut grad.sentence);
    }
    model.concept.backward(&q, &d_q, &mut grad.concept);
    grad.flatten()
}

fn cross_loss(model: &CrossEncoder, kind: LossKind, inst: &GradInstance) -> f64 {
    let z: Vec<f64> = inst
        .candidates
        .iter()
        .map(|c| model.score_ids(&inst.concepts, c).unwrap())
        .collect();
    apply_loss(kind, &z, inst).loss
}

fn cross_grad(model: &CrossEncoder, kind: LossKind, inst: &GradInstance) -> Vec<f64> {
    let caches: Vec<_> = inst
        .candidates
        .iter()
        .map(|c| model.forward(&inst.concepts, c).unwrap())
        .collect();
    let z: Vec<f64> = caches.iter().map(|c| c.score).collect();
    let lg = apply_loss(kind, &z, inst);
    let mut grad = model.zeros_like();
    for (c, g) in caches.iter().zip(&lg.grad) {
        model.backward(c, *g, &mut grad);
    }
    grad.flatten()
}

fn central_differences<M: ParamSet + Clone>(model: &M, h: f64, loss: impl Fn(&M) -> f64) -> Vec<f64> {
    let mut work = model.clone();
    (0..model.num_params())
        .map(|i| {
            let orig = *work.param_mut(i);
            *work.param_mut(i) = orig + h;
            let up = loss(&work);
            *work.param_mut(i) = orig - h;
            let down = loss(&work);
            *work.param_mut(i) = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// ‖a − n‖ / max(‖a‖, ‖n‖) over the whole parameter vector.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    let scale = norm(analytic).max(norm(numeric));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

pub const FD_STEP: f64 = 1e-4;

/// Relative gradient error of `kind` composed with a seeded dual encoder.
pub fn dual_gradcheck(seed: u64, kind: LossKind) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = DualEncoder::new(grad_vocab(), GRAD_DIMS, &mut rng);
    let inst = grad_instance(&mut rng);
    let analytic = dual_grad(&model, kind, &inst);
    let numeric = central_differences(&model, FD_STEP, |m| dual_loss(m, kind, &inst));
    relative_error(&analytic, &numeric)
}

/// Relative gradient error of `kind` composed with a seeded cross encoder.
pub fn cross_gradcheck(seed: u64, kind: LossKind) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = CrossEncoder::new(grad_vocab(), GRAD_DIMS, &mut rng);
    let inst = grad_instance(&mut rng);
    let analytic = cross_grad(&model, kind, &inst);
    let numeric = central_differences(&model, FD_STEP, |m| cross_loss(m, kind, &inst));
    relative_error(&analytic, &numeric)
}

/// Ten examples with one reference each and a four-sentence pool of graded
/// truncations of that reference, so metric scores are strictly ordered.
pub struct GradedToy {
    pub corpus: Corpus,
    pub examples: Vec<DatasetExample>,
    pub pools: Vec<CandidatePool>,
}

pub fn graded_toy(n: usize) -> GradedToy {
    let keep = [7usize, 5, 3, 1];
    let mut raw = Vec::new();
    let mut examples = Vec::new();
    for e in 0..n {
        let template: Vec<String> = (0..8).map(|t| format!("e{e}t{t}")).collect();
        for (v, &k) in keep.iter().enumerate() {
            let mut s = template[..k].to_vec();
            s.extend((k..8).map(|t| format!("e{e}v{v}j{t}")));
            raw.push(s.join(" "));
        }
        examples.push(DatasetExample::new([&template[0], &template[1]], [template.join(" ")]).unwrap());
    }
    let corpus = filter_corpus(&raw, &ExclusionSet::from_examples(&examples));
    assert_eq!(corpus.len(), raw.len());
    let pools = (0..n)
        .map(|e| CandidatePool::new(e, (0..keep.len()).map(|v| e * keep.len() + v).collect()))
        .collect();
    GradedToy { corpus, examples, pools }
}

impl GradedToy {
    /// Tokens of the fixed training list: the reference, then the pool.
    pub fn list_tokens(&self, e: usize) -> Vec<&[String]> {
        let mut out = vec![self.examples[e].references[0].tokens.as_slice()];
        out.extend(self.pools[e].ids.iter().map(|&id| self.corpus.get(id).unwrap().tokens.as_slice()));
        out
    }

    /// Kendall τ between a scorer's order and the metric order on list `e`.
    pub fn tau_vs_metric(&self, e: usize, metric: Metric, score: impl Fn(&[String]) -> f64) -> f64 {
        let tokens = self.list_tokens(e);
        let refs = self.examples[e].reference_tokens();
        let truth = quality_order(&tokens, &refs, metric).unwrap();
        let scores: Vec<f64> = tokens.iter().map(|t| score(t)).collect();
        kendall_tau(&descending_order(&scores), truth.order()).unwrap()
    }

    /// Kendall τ between two scorers' orders on list `e`.
    pub fn tau_between(&self, e: usize, a: impl Fn(&[String]) -> f64, b: impl Fn(&[String]) -> f64) -> f64 {
        let tokens = self.list_tokens(e);
        let sa: Vec<f64> = tokens.iter().map(|t| a(t)).collect();
        let sb: Vec<f64> = tokens.iter().map(|t| b(t)).collect();
        kendall_tau(&descending_order(&sa), &descending_order(&sb)).unwrap()
    }
}
