//! Browser demo: render a road scene, send it over a noisy channel with the
//! digital chain or a small task-trained codec, and measure coded BER.
//!
//! The plain functions are ordinary Rust so they can be tested natively;
//! the `#[wasm_bindgen]` wrappers only convert arguments and results.

use std::cell::RefCell;

use tscc_core::agent::{agent_act, build_surrogate_agent, AgentSpec, SurrogateAgent};
use tscc_core::baseline::{
    ber_point, ldpc_build, run_digital_chain, CodecQuality, DigitalChain, LdpcCode, Modulation, QamConstellation,
};
use tscc_core::jscc::{forward_pipeline, train_tscc, JsccCodec, Link};
use tscc_core::metrics::{action_mse, psnr};
use tscc_core::rng::{stream_key, StreamRng};
use tscc_core::scene::{generate_dataset, generate_scene, SceneSpec};
use tscc_core::{ChannelConfig, CodecConfig, ImageDims, ImageTensor};
use wasm_bindgen::prelude::*;

pub const DIMS: ImageDims = ImageDims::new(3, 32, 64);
const TRAIN_SCENES: usize = 256;

/// Interleaved RGBA bytes for a canvas `ImageData`.
pub fn to_rgba(x: &ImageTensor) -> Vec<u8> {
    let (h, w) = (x.height(), x.width());
    let mut out = Vec::with_capacity(4 * h * w);
    for y in 0..h {
        for px in 0..w {
            for c in 0..3 {
                out.push((x.at(c.min(x.channels() - 1), y, px) * 255.0).round() as u8);
            }
            out.push(255);
        }
    }
    out
}

struct State {
    agent: SurrogateAgent,
    code: LdpcCode,
    qam: QamConstellation,
    codec: Option<JsccCodec>,
}

thread_local! {
    static STATE: RefCell<Option<State>> = const { RefCell::new(None) };
}

fn with_state<R>(f: impl FnOnce(&mut State) -> R) -> R {
    STATE.with(|s| {
        let mut s = s.borrow_mut();
        let st = s.get_or_insert_with(|| State {
            agent: build_surrogate_agent(AgentSpec::structured(DIMS)).expect("agent"),
            code: ldpc_build(1536, 512, 3, 0).expect("ldpc"),
            qam: QamConstellation::qam64(),
            codec: None,
        });
        f(st)
    })
}

fn spec(seed: u32) -> SceneSpec {
    SceneSpec::new(DIMS, seed as u64)
}

/// Outcome of sending one scene over the channel.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct LinkResult {
    rgba: Vec<u8>,
    failed: bool,
    channel_uses: usize,
    ratio: f64,
    psnr: f64,
    action_mse: f64,
    steer: f64,
    steer_clean: f64,
}

#[wasm_bindgen]
impl LinkResult {
    #[wasm_bindgen(getter)]
    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn failed(&self) -> bool {
        self.failed
    }
    #[wasm_bindgen(getter)]
    pub fn channel_uses(&self) -> usize {
        self.channel_uses
    }
    #[wasm_bindgen(getter)]
    pub fn ratio(&self) -> f64 {
        self.ratio
    }
    #[wasm_bindgen(getter)]
    pub fn psnr(&self) -> f64 {
        self.psnr
    }
    #[wasm_bindgen(getter)]
    pub fn action_mse(&self) -> f64 {
        self.action_mse
    }
    #[wasm_bindgen(getter)]
    pub fn steer(&self) -> f64 {
        self.steer
    }
    #[wasm_bindgen(getter)]
    pub fn steer_clean(&self) -> f64 {
        self.steer_clean
    }
}

fn result(
    st: &State,
    x: &ImageTensor,
    y: &ImageTensor,
    m: &tscc_core::StateVector,
    failed: bool,
    uses: usize,
) -> Result<LinkResult, String> {
    let a = agent_act(&st.agent, x, m).map_err(|e| e.to_string())?;
    let a_hat = agent_act(&st.agent, y, m).map_err(|e| e.to_string())?;
    Ok(LinkResult {
        rgba: to_rgba(y),
        failed,
        channel_uses: uses,
        ratio: uses as f64 / x.len() as f64,
        psnr: psnr(x, y).map_err(|e| e.to_string())?,
        action_mse: action_mse(&a, &a_hat),
        steer: a_hat.steer,
        steer_clean: a.steer,
    })
}

pub fn scene_rgba(seed: u32, index: u32) -> Result<Vec<u8>, String> {
    let (s, _) = generate_scene(&spec(seed), index as u64).map_err(|e| e.to_string())?;
    Ok(to_rgba(&s.image))
}

/// DCT + LDPC(1536, 512) + 64-QAM at source quality `q` over AWGN.
pub fn digital(seed: u32, index: u32, snr_db: f64, q: f64) -> Result<LinkResult, String> {
    let (s, _) = generate_scene(&spec(seed), index as u64).map_err(|e| e.to_string())?;
    with_state(|st| {
        let quality = CodecQuality::new(q).map_err(|e| e.to_string())?;
        let chain = DigitalChain::new(quality, &st.code, &st.qam);
        let ch = ChannelConfig::awgn(snr_db, seed as u64).with_stream(stream_key(&[3, index as u64]));
        let out = run_digital_chain(&s.image, &chain, &ch).map_err(|e| e.to_string())?;
        result(st, &s.image, &out.image, &s.state, out.failed, out.channel_uses)
    })
}

/// Trains the task-oriented codec on a few hundred scenes if not done yet.
/// Returns the final training loss.
pub fn ensure_codec(seed: u32, epochs: usize) -> Result<f64, String> {
    with_state(|st| {
        if st.codec.is_some() {
            return Ok(f64::NAN);
        }
        let data = generate_dataset(&spec(seed), TRAIN_SCENES).map_err(|e| e.to_string())?;
        let cfg = CodecConfig {
            latent_dim: 16,
            hidden_dims: vec![64],
            epochs: epochs.max(1),
            seed: seed as u64,
            ..CodecConfig::default()
        };
        let trained = train_tscc(&cfg, &data, &st.agent, &st.agent).map_err(|e| e.to_string())?;
        let loss = trained.history.last().map(|l| l.total).unwrap_or(f64::NAN);
        st.codec = Some(trained.codec);
        Ok(loss)
    })
}

/// The trained codec over AWGN; fails if [`ensure_codec`] has not run.
pub fn analog(seed: u32, index: u32, snr_db: f64) -> Result<LinkResult, String> {
    let (s, _) = generate_scene(&spec(seed), index as u64).map_err(|e| e.to_string())?;
    with_state(|st| {
        let codec = st.codec.as_ref().ok_or("train the codec first")?;
        let eps = StreamRng::new(seed as u64, stream_key(&[1, index as u64, 0xE5])).gaussian_vec(codec.latent_dim());
        let ch = ChannelConfig::awgn(snr_db, seed as u64).with_stream(stream_key(&[1, index as u64]));
        let out = forward_pipeline(codec, &s.image, &Link::Channel(ch), &eps).map_err(|e| e.to_string())?;
        result(st, &s.image, &out.y, &s.state, false, codec.channel_uses())
    })
}

/// Coded 64-QAM BER over `blocks` LDPC codewords at `snr_db`.
pub fn qam64_ber(snr_db: f64, blocks: usize) -> Result<f64, String> {
    with_state(|st| {
        let m = Modulation::Qam(st.qam.clone());
        let bits = blocks.max(1) * st.code.k_info();
        ber_point(&st.code, &m, snr_db, bits, 50, 0)
            .map(|p| p.ber())
            .map_err(|e| e.to_string())
    })
}

#[wasm_bindgen(js_name = renderScene)]
pub fn render_scene_js(seed: u32, index: u32) -> Result<Vec<u8>, JsError> {
    scene_rgba(seed, index).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = sendDigital)]
pub fn send_digital_js(seed: u32, index: u32, snr_db: f64, quality: f64) -> Result<LinkResult, JsError> {
    digital(seed, index, snr_db, quality).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = trainCodec)]
pub fn train_codec_js(seed: u32, epochs: usize) -> Result<f64, JsError> {
    ensure_codec(seed, epochs).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = sendAnalog)]
pub fn send_analog_js(seed: u32, index: u32, snr_db: f64) -> Result<LinkResult, JsError> {
    analog(seed, index, snr_db).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = qam64Ber)]
pub fn qam64_ber_js(snr_db: f64, blocks: usize) -> Result<f64, JsError> {
    qam64_ber(snr_db, blocks).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = imageSize)]
pub fn image_size() -> Vec<u32> {
    vec![DIMS.width as u32, DIMS.height as u32]
}
