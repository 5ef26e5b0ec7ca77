//! Browser bindings. Each export returns JSON text or a typed array.

pub mod demo;

use wasm_bindgen::prelude::*;

pub use demo::Demo;

fn js(e: String) -> JsError {
    JsError::new(&e)
}

#[wasm_bindgen(js_name = Demo)]
pub struct JsDemo(Demo);

#[wasm_bindgen(js_class = Demo)]
impl JsDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(videos: u32, frames: u32, dim: u32, seed: u32) -> Result<JsDemo, JsError> {
        Demo::build(videos, frames, dim, u64::from(seed))
            .map(JsDemo)
            .map_err(js)
    }

    pub fn summary(&self) -> String {
        serde_json::to_string(&self.0.summary()).unwrap_or_default()
    }

    pub fn search(
        &self,
        query: &str,
        method: &str,
        k: u32,
        pool_size: u32,
        game: Option<String>,
    ) -> Result<String, JsError> {
        let hits = self
            .0
            .search(
                query,
                method,
                k as usize,
                pool_size as usize,
                game.as_deref(),
            )
            .map_err(js)?;
        Ok(serde_json::to_string(&hits).unwrap_or_default())
    }

    #[wasm_bindgen(js_name = frameScores)]
    pub fn frame_scores(&self, query: &str, video_id: u32) -> Result<Vec<f32>, JsError> {
        self.0.frame_scores(query, video_id).map_err(js)
    }
}
