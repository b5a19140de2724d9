//! Input and output records for the batch jobs. Every file, in both
//! directions, carries `"schema": "adelikit/1"`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use adelikit_core::format::{
    ChartDto, ConnectionDto, GSystemDto, IdealDto, MatrixDto, PolyDto, SeriesDto, TubeDto,
};
use adelikit_core::weight::StrataData;

#[derive(Debug, Deserialize)]
pub struct NormInput {
    pub schema: String,
    pub ideal: IdealDto,
    pub element: PolyDto,
    #[serde(default)]
    pub oracle: bool,
    #[serde(default = "default_oracle_deg")]
    pub oracle_deg: u32,
    #[serde(default = "default_oracle_height")]
    pub oracle_height: u64,
}

fn default_oracle_deg() -> u32 {
    2
}
fn default_oracle_height() -> u64 {
    16
}

#[derive(Debug, Serialize)]
pub struct NormOutput {
    pub schema: String,
    pub bad: Vec<(String, String)>,
    pub default: String,
    pub certified: BTreeMap<String, bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<Vec<(String, String)>>,
}

#[derive(Debug, Deserialize)]
pub struct GroebnerInput {
    pub schema: String,
    pub ideal: IdealDto,
}

#[derive(Debug, Serialize)]
pub struct GroebnerOutput {
    pub schema: String,
    pub basis: IdealDto,
    pub reduced: bool,
}

#[derive(Debug, Deserialize)]
pub struct SeriesInput {
    pub schema: String,
    pub op: String,
    #[serde(default)]
    pub args: Vec<SeriesDto>,
    /// polynomial B for compose / faa-coeff, over the coefficient ring
    #[serde(default)]
    pub poly: Option<PolyDto>,
    #[serde(default)]
    pub poly_vars: usize,
    /// derivative variable (1-based)
    #[serde(default)]
    pub index: usize,
    /// multi-index for faa-coeff
    #[serde(default)]
    pub j: Option<Vec<u32>>,
    #[serde(default)]
    pub fit_alpha: bool,
}

#[derive(Debug, Serialize)]
pub struct SeriesOutput {
    pub schema: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<SeriesDto>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficient: Option<PolyDto>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateDto>,
}

#[derive(Debug, Serialize)]
pub struct CertificateDto {
    pub per_place: Vec<(String, String, String)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<u32>,
    pub witnessed_order: usize,
}

#[derive(Debug, Deserialize)]
pub struct SolveTubeInput {
    pub schema: String,
    pub mode: String,
    #[serde(default)]
    pub chart: Option<ChartDto>,
    #[serde(default)]
    pub coeff_ring: Option<IdealDto>,
    #[serde(default)]
    pub b: Vec<PolyDto>,
    #[serde(default)]
    pub b_vars: usize,
    #[serde(default)]
    pub c: Vec<SeriesDto>,
    #[serde(default)]
    pub e: Vec<PolyDto>,
    #[serde(default)]
    pub minor_rows: Vec<usize>,
}

#[derive(Debug, Serialize)]
pub struct SolveTubeOutput {
    pub schema: String,
    pub components: Vec<SeriesDto>,
    pub defect_order: Option<usize>,
    pub certificate: CertificateDto,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsDto>,
}

#[derive(Debug, Serialize)]
pub struct BoundsDto {
    pub alpha: u32,
    pub beta: u32,
    pub tau: Vec<(String, String)>,
    pub bad_places: Vec<String>,
}

#[derive(Debug, Deserialize)]
pub struct FlattenInput {
    pub schema: String,
    pub chart: ChartDto,
    pub element: PolyDto,
}

#[derive(Debug, Serialize)]
pub struct FlattenOutput {
    pub schema: String,
    pub series: SeriesDto,
    pub flat_element: PolyDto,
}

#[derive(Debug, Deserialize)]
pub struct TubeMemberInput {
    pub schema: String,
    pub tube: TubeDto,
    pub point: Vec<String>,
    pub place: String,
}

#[derive(Debug, Serialize)]
pub struct TubeMemberOutput {
    pub schema: String,
    pub member: bool,
}

#[derive(Debug, Deserialize)]
pub struct RefineTubeInput {
    pub schema: String,
    pub tube: TubeDto,
    pub tube_prime: TubeDto,
    pub lifting_h: Vec<Vec<PolyDto>>,
    pub lifting_g: Vec<PolyDto>,
}

#[derive(Debug, Serialize)]
pub struct RefineTubeOutput {
    pub schema: String,
    pub refined: TubeDto,
    pub tau0: u32,
    pub places_checked: Vec<String>,
    pub grid_radius: i64,
    pub extra_factors: BTreeMap<String, u32>,
}

#[derive(Debug, Deserialize)]
pub struct FlatSectionInput {
    pub schema: String,
    pub connection: ConnectionDto,
    pub initial: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct FlatSectionOutput {
    pub schema: String,
    pub gsystem: GSystemDto,
}

#[derive(Debug, Deserialize)]
pub struct RadiusInput {
    pub schema: String,
    pub gsystem: GSystemDto,
    #[serde(default)]
    pub rescale: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct RadiusOutput {
    pub schema: String,
    pub window: usize,
    pub slopes: Vec<SlopeDto>,
}

#[derive(Debug, Serialize)]
pub struct SlopeDto {
    pub place: String,
    pub slope_ln: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_q: Option<String>,
    pub radius_below_one: bool,
}

#[derive(Debug, Deserialize)]
pub struct RelevantInput {
    pub schema: String,
    pub gsystem: GSystemDto,
    pub xi: String,
}

#[derive(Debug, Serialize)]
pub struct RelevantOutput {
    pub schema: String,
    pub places: Vec<String>,
}

#[derive(Debug, Deserialize)]
pub struct HeightInput {
    pub schema: String,
    pub kind: String,
    #[serde(default)]
    pub gsystem: Option<GSystemDto>,
    #[serde(default)]
    pub xi: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct HeightOutput {
    pub schema: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergent: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct RelationInput {
    pub schema: String,
    pub gsystem: GSystemDto,
    pub relation: PolyDto,
    pub xi: String,
    pub place: String,
}

#[derive(Debug, Serialize)]
pub struct RelationOutput {
    pub schema: String,
    pub residual: String,
    pub tail: String,
}

#[derive(Debug, Deserialize)]
pub struct WeightFiltrationInput {
    pub schema: String,
    pub matrix: MatrixDto,
    #[serde(default = "default_weight_center")]
    pub weight_center: usize,
}

fn default_weight_center() -> usize {
    2
}

#[derive(Debug, Serialize)]
pub struct WeightFiltrationOutput {
    pub schema: String,
    pub nilpotency_order: usize,
    pub dim_image: usize,
    pub graded_dims: Vec<usize>,
    pub subspaces: Vec<MatrixDto>,
}

#[derive(Debug, Deserialize)]
pub struct SteenbrinkInput {
    pub schema: String,
    #[serde(flatten)]
    pub strata: StrataData,
    #[serde(default)]
    pub d1: Vec<D1Dto>,
}

#[derive(Debug, Deserialize)]
pub struct D1Dto {
    pub term: String,
    #[serde(default)]
    pub d_in: Option<MatrixDto>,
    #[serde(default)]
    pub d_out: Option<MatrixDto>,
}

#[derive(Debug, Serialize)]
pub struct SteenbrinkOutput {
    pub schema: String,
    pub e1: BTreeMap<String, usize>,
    pub tuple: Vec<usize>,
    pub symmetric: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e2: Option<BTreeMap<String, usize>>,
}

#[derive(Debug, Deserialize)]
pub struct ThresholdInput {
    pub schema: String,
    pub k: usize,
    pub family: String,
    #[serde(default)]
    pub dim_im_n: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct ThresholdOutput {
    pub schema: String,
    pub jump: usize,
}

#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub schema: String,
    pub error: ErrorBody,
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
}
