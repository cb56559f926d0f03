//! Seq2seq translator from natural to synthetic instructions, and the
//! encoder-weight transfer into an agent.

use rand_chacha::ChaCha8Rng;

use super::et::{encode_language_into, ETParams, LangEncoderIds};
use super::{ModelConfig, ModelError};
use crate::lang::{BOS, EOS};
use crate::nn::{
    bind, decoder_block, linear, sinusoidal_encoding, AttentionMask, DecoderBlockParams,
    EncoderBlockParams,
};
use crate::rng::CounterRng;
use crate::tensor::{Graph, Tensor, TensorId};

#[derive(Clone, Debug)]
pub struct TranslatorParams {
    pub config: ModelConfig,
    pub enc_embed: Tensor,
    pub enc_blocks: Vec<EncoderBlockParams>,
    pub enc_ln_gamma: Tensor,
    pub enc_ln_beta: Tensor,
    pub dec_embed: Tensor,
    pub dec_blocks: Vec<DecoderBlockParams>,
    pub dec_ln_gamma: Tensor,
    pub dec_ln_beta: Tensor,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

impl TranslatorParams {
    pub fn init(config: &ModelConfig, rng: &mut ChaCha8Rng) -> Result<Self, ModelError> {
        let d = config.model_dim;
        let embed_std = 1.0 / (d as f64).sqrt();
        let enc_blocks = (0..config.blocks_language)
            .map(|_| EncoderBlockParams::init(d, config.heads, config.ff_dim, rng))
            .collect::<Result<Vec<_>, _>>()?;
        let dec_blocks = (0..config.blocks_language)
            .map(|_| DecoderBlockParams::init(d, config.heads, config.ff_dim, rng))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TranslatorParams {
            config: config.clone(),
            enc_embed: Tensor::randn(&[config.vocab_natural, d], embed_std, rng),
            enc_blocks,
            enc_ln_gamma: Tensor::full(&[d], 1.0),
            enc_ln_beta: Tensor::zeros(&[d]),
            dec_embed: Tensor::randn(&[config.vocab_synthetic, d], embed_std, rng),
            dec_blocks,
            dec_ln_gamma: Tensor::full(&[d], 1.0),
            dec_ln_beta: Tensor::zeros(&[d]),
            out_w: Tensor::xavier(d, config.vocab_synthetic, rng),
            out_b: Tensor::zeros(&[config.vocab_synthetic]),
        })
    }

    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = Vec::new();
        out.push(("lang.nat_embed".into(), &self.enc_embed));
        for (i, b) in self.enc_blocks.iter().enumerate() {
            b.named(&format!("lang.{i}"), &mut out);
        }
        out.push(("lang.ln_gamma".into(), &self.enc_ln_gamma));
        out.push(("lang.ln_beta".into(), &self.enc_ln_beta));
        out.push(("dec.embed".into(), &self.dec_embed));
        for (i, b) in self.dec_blocks.iter().enumerate() {
            b.named(&format!("dec.{i}"), &mut out);
        }
        out.push(("dec.ln_gamma".into(), &self.dec_ln_gamma));
        out.push(("dec.ln_beta".into(), &self.dec_ln_beta));
        out.push(("out_w".into(), &self.out_w));
        out.push(("out_b".into(), &self.out_b));
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = Vec::new();
        out.push(("lang.nat_embed".into(), &mut self.enc_embed));
        for (i, b) in self.enc_blocks.iter_mut().enumerate() {
            b.named_mut(&format!("lang.{i}"), &mut out);
        }
        out.push(("lang.ln_gamma".into(), &mut self.enc_ln_gamma));
        out.push(("lang.ln_beta".into(), &mut self.enc_ln_beta));
        out.push(("dec.embed".into(), &mut self.dec_embed));
        for (i, b) in self.dec_blocks.iter_mut().enumerate() {
            b.named_mut(&format!("dec.{i}"), &mut out);
        }
        out.push(("dec.ln_gamma".into(), &mut self.dec_ln_gamma));
        out.push(("dec.ln_beta".into(), &mut self.dec_ln_beta));
        out.push(("out_w".into(), &mut self.out_w));
        out.push(("out_b".into(), &mut self.out_b));
        out
    }
}

pub struct TranslatorOutput {
    pub graph: Graph,
    pub binds: Vec<(String, TensorId)>,
    pub logits: TensorId,
}

/// Teacher-forced forward: encode natural tokens, decode the BOS-prefixed
/// synthetic sequence through masked self- and cross-attention.
pub fn translator_forward(
    x_ids: &[usize],
    y_shifted: &[usize],
    params: &TranslatorParams,
    training: bool,
    rng: &mut CounterRng,
) -> Result<TranslatorOutput, ModelError> {
    assert!(!x_ids.is_empty() && !y_shifted.is_empty());
    let cfg = &params.config;
    let d = cfg.model_dim;
    let mut g = Graph::new();
    let mut binds = Vec::new();

    let enc = LangEncoderIds {
        table: &params.enc_embed,
        table_name: "nat_embed",
        blocks: &params.enc_blocks,
        ln_gamma: &params.enc_ln_gamma,
        ln_beta: &params.enc_ln_beta,
        prefix: "lang",
    };
    let enc_out = encode_language_into(
        &mut g,
        &mut binds,
        &enc,
        x_ids,
        cfg.dropout,
        training,
        &mut rng.split(1),
        None,
    )?;

    let dec_table = bind(&mut g, &mut binds, "dec", "embed", &params.dec_embed);
    let y_raw = g.gather_rows(dec_table, y_shifted);
    let y_scaled = g.scale(y_raw, (d as f64).sqrt());
    let pe = g.constant(sinusoidal_encoding(y_shifted.len(), d)?);
    let mut y = g.add(y_scaled, pe)?;

    let self_mask = AttentionMask::causal(y_shifted.len());
    let mut dec_rng = rng.split(2);
    for (i, block) in params.dec_blocks.iter().enumerate() {
        let ids = block.leaf(&mut g, &mut binds, &format!("dec.{i}"));
        y = decoder_block(
            &mut g,
            y,
            enc_out,
            &self_mask,
            &ids,
            cfg.dropout,
            training,
            &mut dec_rng,
            None,
        )?;
    }
    let gamma = bind(&mut g, &mut binds, "dec", "ln_gamma", &params.dec_ln_gamma);
    let beta = bind(&mut g, &mut binds, "dec", "ln_beta", &params.dec_ln_beta);
    let y = g.layer_norm(y, gamma, beta, 1e-5)?;

    let ow = bind(&mut g, &mut binds, "", "out_w", &params.out_w);
    let ob = bind(&mut g, &mut binds, "", "out_b", &params.out_b);
    let logits = linear(&mut g, y, ow, ob)?;

    Ok(TranslatorOutput {
        graph: g,
        binds,
        logits,
    })
}

/// Greedy decoding: argmax token by token until EOS or `max_len`.
pub fn greedy_decode(
    x_ids: &[usize],
    params: &TranslatorParams,
    max_len: usize,
) -> Result<Vec<usize>, ModelError> {
    let mut out: Vec<usize> = Vec::new();
    let v = params.config.vocab_synthetic;
    let mut rng = CounterRng::new(0);
    for _ in 0..max_len {
        let mut shifted = Vec::with_capacity(out.len() + 1);
        shifted.push(BOS);
        shifted.extend_from_slice(&out);
        let fwd = translator_forward(x_ids, &shifted, params, false, &mut rng)?;
        let last = fwd.graph.data(fwd.logits);
        let row = &last[(shifted.len() - 1) * v..shifted.len() * v];
        let mut best = 0;
        for (i, &val) in row.iter().enumerate() {
            if val > row[best] {
                best = i;
            }
        }
        if best == EOS {
            break;
        }
        out.push(best);
    }
    Ok(out)
}

/// Copy the translator's language encoder (look-up table, blocks, final
/// norm) into an agent; every other agent parameter is untouched.
pub fn transfer_encoder(
    translator: &TranslatorParams,
    agent: &mut ETParams,
) -> Result<(), ModelError> {
    let pairs: Vec<(&Tensor, &mut Tensor)> = vec![
        (&translator.enc_embed, &mut agent.nat_embed),
        (&translator.enc_ln_gamma, &mut agent.lang_ln_gamma),
        (&translator.enc_ln_beta, &mut agent.lang_ln_beta),
    ];
    for (src, dst) in pairs {
        if src.shape != dst.shape {
            return Err(ModelError::Transfer(format!(
                "shape {:?} vs {:?}",
                src.shape, dst.shape
            )));
        }
        dst.data.clone_from(&src.data);
    }
    if translator.enc_blocks.len() != agent.lang_blocks.len() {
        return Err(ModelError::Transfer(format!(
            "{} encoder blocks vs {}",
            translator.enc_blocks.len(),
            agent.lang_blocks.len()
        )));
    }
    for (src, dst) in translator.enc_blocks.iter().zip(agent.lang_blocks.iter_mut()) {
        let mut src_named = Vec::new();
        src.named("b", &mut src_named);
        let mut dst_named = Vec::new();
        dst.named_mut("b", &mut dst_named);
        for ((sn, st), (dn, dt)) in src_named.iter().zip(dst_named.iter_mut()) {
            assert_eq!(sn, dn);
            if st.shape != dt.shape {
                return Err(ModelError::Transfer(format!(
                    "{sn}: shape {:?} vs {:?}",
                    st.shape, dt.shape
                )));
            }
            dt.data.clone_from(&st.data);
        }
    }
    Ok(())
}
