"""Settings and configuration management for patsim.

Configuration is loaded from (in order of precedence):
1. CLI arguments (highest priority)
2. Environment variables (PATSIM_*; port endpoints and credentials only)
3. Config file (./patsim.yaml or ~/.patsim/config.yaml)
4. Built-in defaults (lowest priority)

IMPORTANT: All default values should be defined HERE only.
Other modules should import from config to avoid duplication.
"""
import os
from pathlib import Path
from typing import Optional, Dict, List, Any, Literal
from pydantic import BaseModel, Field
from functools import lru_cache
import yaml


# =============================================================================
# SINGLE SOURCE OF TRUTH: Default Values
# =============================================================================
# All default values are defined here. Do NOT duplicate in other files.

class Defaults:
    """Central location for all default values."""

    SEED = 7

    # Cohort statistics
    MIN_SUPPORT = 5                # Joint-cell floor for a defined risk ratio

    # Profile generation (Phase 1)
    TOP_K = 500                    # Candidate predictors per outcome
    RR_HIGH = 7.0                  # Gate upper bound (inclusive)
    RR_LOW = 1 / 1.5               # Gate lower bound (exclusive)
    DIVERSITY_THRESHOLD = 1.5      # Residual-stage admission threshold (exclusive)
    MAX_RESIDUAL_ADDITIONS = 5
    PREDICTOR_CLIP = (0.01, 0.99)
    N_PROFILES = 200
    GEN_WORKERS = 4

    # Cohort selection (Phase 2)
    COHORT_SIZE = 60

    # Perturbation
    PERTURB_FRACTION = 0.16        # Share of eligible facts replaced
    PERTURB_PROFILE_FRACTION = 1.0
    CANDIDATE_POOL_SIZE = 20
    MIN_DISTANCE = 3
    MIN_RELAXED_DISTANCE = 2
    POOL_EXPANSION = 2

    # Conversation limits
    MAX_TURNS = 30
    WALL_CLOCK_SECONDS = 600
    MAX_RETRIES = 2
    SIM_WORKERS = 4

    # Metrics
    RETRIEVAL_DEPTH = 50
    RANK_TOP_N = 20
    EMBEDDING_DIM = 256
    HASH_BUCKETS = 2048
    FKGL_BACKEND = "heuristic"
    RECOMMEND_MIN_RR = 1.2
    RECOMMEND_FEATURES_PER_DRUG = 15

    # Agreement
    BOOTSTRAP_RESAMPLES = 10000
    ANNOTATOR_NOISE = 0.08

    # Live ports
    LLM_MODEL = "gpt-4o"
    LLM_TEMPERATURE = 0.7
    JUDGE_TEMPERATURE = 0.0
    EMBEDDING_MODEL = "text-embedding-3-small"
    REQUEST_TIMEOUT = 60

    # Synthetic world
    SYNTH_PATIENTS = 2000
    SYNTH_CONCEPTS = 500


# =============================================================================
# Configuration Models
# =============================================================================

class OntologyConfig(BaseModel):
    """Concept table settings."""
    concept_table: Optional[str] = Field(default=None, description="Path to concept table CSV (None = synthetic)")
    max_term_tokens: int = Field(default=6, description="Longest lexicon term kept, in tokens")


class SyntheticConfig(BaseModel):
    """Synthetic world fixture settings."""
    n_patients: int = Field(default=Defaults.SYNTH_PATIENTS, description="Synthetic cohort size")
    n_concepts: int = Field(default=Defaults.SYNTH_CONCEPTS, description="Synthetic ontology size")


class CohortConfig(BaseModel):
    """Patient cohort settings."""
    records: Optional[str] = Field(default=None, description="Path to patient records JSONL (None = synthetic)")
    min_support: int = Field(default=Defaults.MIN_SUPPORT, description="Joint-cell floor for defined risk ratios")
    synthetic: SyntheticConfig = Field(default_factory=SyntheticConfig)


class GenerationConfig(BaseModel):
    """Profile generation settings (Phase 1 and Phase 2)."""
    outcome: Optional[str] = Field(default=None, description="Outcome concept id (None = most common outcome)")
    n_profiles: int = Field(default=Defaults.N_PROFILES, description="Profiles generated per batch")
    top_k: int = Field(default=Defaults.TOP_K, description="Candidate predictors per outcome")
    rr_high: float = Field(default=Defaults.RR_HIGH, description="Gate upper bound (inclusive)")
    rr_low: float = Field(default=Defaults.RR_LOW, description="Gate lower bound (exclusive)")
    diversity_threshold: float = Field(default=Defaults.DIVERSITY_THRESHOLD, description="Residual admission threshold")
    max_residual_additions: int = Field(default=Defaults.MAX_RESIDUAL_ADDITIONS, description="Residual stage cap")
    strict_pair_gate: bool = Field(default=False, description="Require every defined pair inside the band")
    cohort_size: int = Field(default=Defaults.COHORT_SIZE, description="Profiles kept by sigma-band selection")
    workers: int = Field(default=Defaults.GEN_WORKERS, description="Concurrent generation workers")


class PerturbationSettings(BaseModel):
    """Error-injection settings."""
    target_fraction: float = Field(default=Defaults.PERTURB_FRACTION, description="Share of eligible facts replaced")
    profile_fraction: float = Field(default=Defaults.PERTURB_PROFILE_FRACTION, description="Share of profiles perturbed")
    candidate_pool_size: int = Field(default=Defaults.CANDIDATE_POOL_SIZE, description="Nearest neighbours considered")
    min_distance: int = Field(default=Defaults.MIN_DISTANCE, description="Minimum is-a path length")
    min_relaxed_distance: int = Field(default=Defaults.MIN_RELAXED_DISTANCE, description="Floor for relaxed distance")
    pool_expansion: int = Field(default=Defaults.POOL_EXPANSION, description="Pool multiplier on first relaxation")


class SimulationConfig(BaseModel):
    """Conversation orchestration settings."""
    mode: Literal["stub", "live"] = Field(default="stub", description="stub (offline) or live (HTTP ports)")
    max_turns: int = Field(default=Defaults.MAX_TURNS, description="Patient turns before abort")
    wall_clock_seconds: float = Field(default=Defaults.WALL_CLOCK_SECONDS, description="Per-conversation time cap")
    max_retries: int = Field(default=Defaults.MAX_RETRIES, description="Re-requests after a schema violation")
    workers: int = Field(default=Defaults.SIM_WORKERS, description="Concurrent conversations")
    design: Optional[str] = Field(default=None, description="Experiment design file (None = full design)")
    model: str = Field(default=Defaults.LLM_MODEL, description="Chat model for the live patient port")
    temperature: float = Field(default=Defaults.LLM_TEMPERATURE, description="Patient sampling temperature")


class MetricsConfig(BaseModel):
    """Evaluation metric settings."""
    fkgl_backend: Literal["heuristic", "textstat"] = Field(default=Defaults.FKGL_BACKEND, description="Readability backend")
    retrieval_depth: int = Field(default=Defaults.RETRIEVAL_DEPTH, description="Candidates kept per retrieval trace")
    rank_top_n: int = Field(default=Defaults.RANK_TOP_N, description="Rank cut-off for the top-N share")
    reference_scope: Literal["expressed", "profile"] = Field(default="expressed", description="Reference concept set for recall")
    embedder: Literal["hash", "openai"] = Field(default="hash", description="Embedding port")
    embedding_dim: int = Field(default=Defaults.EMBEDDING_DIM, description="Stub embedding dimension")
    embedding_model: str = Field(default=Defaults.EMBEDDING_MODEL, description="Live embedding model")
    classifier: Literal["keyword", "http"] = Field(default="keyword", description="Depression/toxicity classifier port")
    export_embeddings: bool = Field(default=True, description="Write per-turn embedding matrix")


class AgreementConfig(BaseModel):
    """Annotation agreement settings."""
    resamples: int = Field(default=Defaults.BOOTSTRAP_RESAMPLES, description="Paired bootstrap resamples")
    cluster_by_conversation: bool = Field(default=False, description="Resample conversations instead of items")
    judge_template: Optional[str] = Field(default=None, description="Judge prompt template (None = built-in)")
    judge_model: str = Field(default=Defaults.LLM_MODEL, description="Judge chat model")
    annotator_noise: float = Field(default=Defaults.ANNOTATOR_NOISE, description="Label flip rate of simulated annotators")


class ReportConfig(BaseModel):
    """Report settings."""
    formats: List[str] = Field(default_factory=lambda: ["csv", "json"], description="Report export formats")
    reference_policy: Optional[str] = Field(default=None, description="CSV profile_id,recommendation (None = policy on full profile)")


class OutputConfig(BaseModel):
    """Output paths and naming."""
    base_dir: str = Field(default="output", description="Base output directory")
    run_dir: str = Field(default="output/run", description="Default run directory")


class APIConfig(BaseModel):
    """Port endpoints and credentials (loaded from environment)."""
    chat_base_url: Optional[str] = Field(default=None, description="Chat-completion base URL")
    chat_api_key: Optional[str] = Field(default=None, description="Chat-completion API key")
    embedding_base_url: Optional[str] = Field(default=None, description="Embedding base URL")
    embedding_api_key: Optional[str] = Field(default=None, description="Embedding API key")
    sut_base_url: Optional[str] = Field(default=None, description="Decision-aid base URL")
    sut_api_key: Optional[str] = Field(default=None, description="Decision-aid API key")
    depression_url: Optional[str] = Field(default=None, description="Depression classifier endpoint")
    toxicity_url: Optional[str] = Field(default=None, description="Toxicity classifier endpoint")
    classifier_api_key: Optional[str] = Field(default=None, description="Classifier API key")
    timeout: int = Field(default=Defaults.REQUEST_TIMEOUT, description="HTTP timeout in seconds")


class Settings(BaseModel):
    """Main settings container."""
    seed: int = Field(default=Defaults.SEED, description="Root random seed")
    ontology: OntologyConfig = Field(default_factory=OntologyConfig)
    cohort: CohortConfig = Field(default_factory=CohortConfig)
    generation: GenerationConfig = Field(default_factory=GenerationConfig)
    perturbation: PerturbationSettings = Field(default_factory=PerturbationSettings)
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    metrics: MetricsConfig = Field(default_factory=MetricsConfig)
    agreement: AgreementConfig = Field(default_factory=AgreementConfig)
    report: ReportConfig = Field(default_factory=ReportConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    api: APIConfig = Field(default_factory=APIConfig)

    def load_api_keys_from_env(self) -> None:
        """Load port endpoints and keys from environment variables.

        Values already set in the config file are kept when the variable is unset.
        """
        env = {
            "chat_base_url": os.getenv("PATSIM_CHAT_BASE_URL"),
            "chat_api_key": os.getenv("PATSIM_CHAT_API_KEY") or os.getenv("OPENAI_API_KEY"),
            "embedding_base_url": os.getenv("PATSIM_EMBEDDING_BASE_URL"),
            "embedding_api_key": os.getenv("PATSIM_EMBEDDING_API_KEY") or os.getenv("OPENAI_API_KEY"),
            "sut_base_url": os.getenv("PATSIM_SUT_BASE_URL"),
            "sut_api_key": os.getenv("PATSIM_SUT_API_KEY"),
            "depression_url": os.getenv("PATSIM_DEPRESSION_URL"),
            "toxicity_url": os.getenv("PATSIM_TOXICITY_URL"),
            "classifier_api_key": os.getenv("PATSIM_CLASSIFIER_API_KEY"),
        }
        for name, value in env.items():
            if value:
                setattr(self.api, name, value)


# =============================================================================
# Config File Loading
# =============================================================================

def find_config_file() -> Optional[Path]:
    """Find config file in standard locations.

    Search order:
    1. ./patsim.yaml (current directory)
    2. ~/.patsim/config.yaml (user home)
    3. ~/.config/patsim/config.yaml (XDG config)
    """
    locations = [
        Path("./patsim.yaml"),
        Path("./patsim.yml"),
        Path.home() / ".patsim" / "config.yaml",
        Path.home() / ".patsim" / "config.yml",
        Path.home() / ".config" / "patsim" / "config.yaml",
    ]

    for path in locations:
        if path.exists():
            return path

    return None


def load_config_file(path: Optional[Path] = None) -> Dict[str, Any]:
    """Load configuration from YAML file.

    Args:
        path: Optional explicit path, otherwise searches standard locations

    Returns:
        Dictionary of config values (empty if no file found)
    """
    if path is None:
        path = find_config_file()

    if path is None or not path.exists():
        return {}

    try:
        with open(path, "r") as f:
            config = yaml.safe_load(f) or {}
        return config
    except Exception as e:
        print(f"[WARNING] Failed to load config file {path}: {e}")
        return {}


def merge_config(base: Dict, override: Dict) -> Dict:
    """Deep merge two config dictionaries."""
    result = base.copy()
    for key, value in override.items():
        if key in result and isinstance(result[key], dict) and isinstance(value, dict):
            result[key] = merge_config(result[key], value)
        else:
            result[key] = value
    return result


@lru_cache()
def get_settings(config_file: Optional[str] = None) -> Settings:
    """Get settings instance (cached).

    Loads from config file and environment variables.

    Args:
        config_file: Optional explicit config file path

    Returns:
        Settings instance with merged configuration
    """
    file_config = load_config_file(Path(config_file) if config_file else None)

    if file_config:
        settings = Settings.model_validate(file_config)
    else:
        settings = Settings()

    settings.load_api_keys_from_env()

    return settings


def settings_with_overrides(settings: Settings, overrides: Dict[str, Any]) -> Settings:
    """Return a copy of settings with a nested override dict applied.

    Used by CLI handlers so cached settings are never mutated.
    """
    data = merge_config(settings.model_dump(), overrides)
    return Settings.model_validate(data)


def create_default_config_file(path: Path = None) -> Path:
    """Create a default config file with all options documented.

    Args:
        path: Where to create the file (default: ./patsim.yaml)

    Returns:
        Path to created file
    """
    if path is None:
        path = Path("./patsim.yaml")

    default_config = f"""\
# patsim Configuration File
# =========================
# Place this file in:
#   - ./patsim.yaml (current directory)
#   - ~/.patsim/config.yaml (user home)
#   - ~/.config/patsim/config.yaml (XDG config)

seed: {Defaults.SEED}               # Root seed; every stage derives its own seed from it

ontology:
  concept_table: null      # CSV with id,vocabulary,display_name,parent_ids (null = synthetic)
  max_term_tokens: 6       # Longest lexicon term kept

cohort:
  records: null            # JSONL patient records (null = synthetic)
  min_support: {Defaults.MIN_SUPPORT}           # Joint-cell floor for a defined risk ratio
  synthetic:
    n_patients: {Defaults.SYNTH_PATIENTS}
    n_concepts: {Defaults.SYNTH_CONCEPTS}

# Profile generation
generation:
  outcome: null            # Outcome concept id (null = most frequently treated)
  n_profiles: {Defaults.N_PROFILES}
  top_k: {Defaults.TOP_K}              # Candidate predictors per outcome
  rr_high: {Defaults.RR_HIGH}            # Gate band (rr_low, rr_high]
  rr_low: {Defaults.RR_LOW!r}
  diversity_threshold: {Defaults.DIVERSITY_THRESHOLD}
  max_residual_additions: {Defaults.MAX_RESIDUAL_ADDITIONS}
  strict_pair_gate: false  # true = every defined pair must fall inside the band
  cohort_size: {Defaults.COHORT_SIZE}          # Profiles kept by sigma-band selection
  workers: {Defaults.GEN_WORKERS}

perturbation:
  target_fraction: {Defaults.PERTURB_FRACTION}    # Share of non-demographic facts replaced
  profile_fraction: {Defaults.PERTURB_PROFILE_FRACTION}
  candidate_pool_size: {Defaults.CANDIDATE_POOL_SIZE}
  min_distance: {Defaults.MIN_DISTANCE}
  min_relaxed_distance: {Defaults.MIN_RELAXED_DISTANCE}
  pool_expansion: {Defaults.POOL_EXPANSION}

simulation:
  mode: "stub"             # stub (offline) or live
  max_turns: {Defaults.MAX_TURNS}
  wall_clock_seconds: {Defaults.WALL_CLOCK_SECONDS}
  max_retries: {Defaults.MAX_RETRIES}
  workers: {Defaults.SIM_WORKERS}
  design: null             # Design YAML (null = full three-setting design)
  model: "{Defaults.LLM_MODEL}"
  temperature: {Defaults.LLM_TEMPERATURE}

metrics:
  fkgl_backend: "heuristic"   # heuristic or textstat
  retrieval_depth: {Defaults.RETRIEVAL_DEPTH}
  rank_top_n: {Defaults.RANK_TOP_N}
  reference_scope: "expressed"  # expressed or profile
  embedder: "hash"         # hash (offline) or openai
  embedding_dim: {Defaults.EMBEDDING_DIM}
  classifier: "keyword"    # keyword (offline) or http
  export_embeddings: true

agreement:
  resamples: {Defaults.BOOTSTRAP_RESAMPLES}
  cluster_by_conversation: false
  judge_template: null     # null = built-in template
  judge_model: "{Defaults.LLM_MODEL}"
  annotator_noise: {Defaults.ANNOTATOR_NOISE}

report:
  formats:
    - csv
    - json
  reference_policy: null   # CSV profile_id,recommendation

output:
  base_dir: "output"
  run_dir: "output/run"

# Endpoints and keys (prefer environment variables)
#   PATSIM_CHAT_BASE_URL, PATSIM_CHAT_API_KEY (or OPENAI_API_KEY)
#   PATSIM_SUT_BASE_URL, PATSIM_SUT_API_KEY
#   PATSIM_DEPRESSION_URL, PATSIM_TOXICITY_URL, PATSIM_CLASSIFIER_API_KEY
# api:
#   timeout: {Defaults.REQUEST_TIMEOUT}
"""

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write(default_config)

    return path
