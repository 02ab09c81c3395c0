#include "protrag/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "protrag/digest.hpp"
#include "protrag/error.hpp"
#include "protrag/text.hpp"

namespace protrag {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(AblationMode mode) {
    switch (mode) {
        case AblationMode::RawOnly: return "RAW_ONLY";
        case AblationMode::HorizontalOnly: return "HORIZONTAL_ONLY";
        case AblationMode::VerticalOnly: return "VERTICAL_ONLY";
        case AblationMode::Full2D: return "FULL_2D";
    }
    return "FULL_2D";
}

AblationMode parse_ablation_mode(std::string_view s) {
    const auto u = text::to_upper(s);
    if (u == "RAW_ONLY") return AblationMode::RawOnly;
    if (u == "HORIZONTAL_ONLY") return AblationMode::HorizontalOnly;
    if (u == "VERTICAL_ONLY") return AblationMode::VerticalOnly;
    if (u == "FULL_2D") return AblationMode::Full2D;
    throw ConfigError("unknown mode '" + std::string(s) +
                      "' (expected RAW_ONLY, HORIZONTAL_ONLY, VERTICAL_ONLY or FULL_2D)");
}

bool runs_horizontal(AblationMode mode) {
    return mode == AblationMode::HorizontalOnly || mode == AblationMode::Full2D;
}
bool runs_vertical(AblationMode mode) { return mode == AblationMode::VerticalOnly || mode == AblationMode::Full2D; }

// ---------------------------------------------------------------------------
// Configuration

PipelineConfig::PipelineConfig() {
    scorer.role = BackendRole::Scorer;
    embedder.role = BackendRole::Embedder;
    generator.role = BackendRole::Generator;
    for (auto* b : {&scorer, &embedder, &generator}) {
        b->endpoint = default_mock_endpoint(b->role);
        b->model = "mock";
    }
    student.seed = seed;
    distillation.seed = seed;
}

void PipelineConfig::validate() const {
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
    try {
        retrieval.validate();
        ig.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    denoise.validate();
    student.validate();
    try {
        generation.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (distillation.per_type < 1) throw ConfigError("distillation.per_type must be >= 1");
    if (distillation.train_parts < 1 || distillation.test_parts < 1)
        throw ConfigError("distillation split parts must be >= 1");
    scorer.validate();
    embedder.validate();
    generator.validate();
}

namespace {

ordered_json backend_tree(const BackendConfig& b) {
    return ordered_json{{"endpoint", b.endpoint},
                        {"model", b.model},
                        {"timeout_ms", b.timeout.count()},
                        {"max_retries", b.max_retries},
                        {"max_in_flight", b.max_in_flight},
                        {"retry_backoff_ms", b.retry_backoff.count()},
                        {"max_prompt_chars", b.max_prompt_chars},
                        {"embedding_dim", b.embedding_dim}};
}

void read_backend(const json& t, BackendConfig& b) {
    b.endpoint = t.at("endpoint").get<std::string>();
    b.model = t.at("model").get<std::string>();
    b.timeout = std::chrono::milliseconds(t.at("timeout_ms").get<std::int64_t>());
    b.max_retries = t.at("max_retries").get<std::uint32_t>();
    b.max_in_flight = t.at("max_in_flight").get<std::uint32_t>();
    b.retry_backoff = std::chrono::milliseconds(t.at("retry_backoff_ms").get<std::int64_t>());
    b.max_prompt_chars = t.at("max_prompt_chars").get<std::size_t>();
    b.embedding_dim = t.at("embedding_dim").get<std::uint32_t>();
}

bool compatible(const json& def, const json& val) {
    if (def.is_null()) return val.is_null() || val.is_number();
    if (def.is_number_unsigned() || def.is_number_integer())
        return val.is_number_integer() || val.is_number_unsigned() ||
               (val.is_number_float() && val.get<double>() == static_cast<double>(static_cast<std::int64_t>(val.get<double>())));
    if (def.is_number_float()) return val.is_number();
    if (def.is_string()) return val.is_string();
    if (def.is_boolean()) return val.is_boolean();
    if (def.is_object()) return val.is_object();
    return false;
}

// Nullable numeric settings, which are null by default.
const std::set<std::string> kNullable{"retrieval.identity_ceiling"};

void overlay(ordered_json& base, const json& over, const std::string& prefix) {
    if (!over.is_object()) throw ConfigError("configuration " + (prefix.empty() ? "root" : "'" + prefix + "'") + " must be an object");
    for (auto it = over.begin(); it != over.end(); ++it) {
        const auto key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!base.contains(it.key())) throw ConfigError("unknown configuration key '" + key + "'");
        auto& slot = base[it.key()];
        if (slot.is_object()) {
            overlay(slot, it.value(), key);
            continue;
        }
        const bool nullable = kNullable.contains(key);
        const bool ok = nullable ? (it.value().is_null() || it.value().is_number()) : compatible(slot, it.value());
        if (!ok) throw ConfigError("configuration key '" + key + "' has the wrong type");
        if (slot.is_number_float() && it.value().is_number())
            slot = it.value().get<double>();
        else
            slot = it.value();
    }
}

PipelineConfig from_tree(const ordered_json& t) {
    PipelineConfig c;
    try {
        c.mode = parse_ablation_mode(t.at("mode").get<std::string>());
        c.seed = t.at("seed").get<std::uint64_t>();
        c.parallelism = t.at("parallelism").get<std::uint32_t>();
        const auto& p = t.at("paths");
        c.paths.index = p.at("index").get<std::string>();
        c.paths.filter_model = p.at("filter_model").get<std::string>();
        c.paths.cache = p.at("cache").get<std::string>();
        c.paths.hits = p.at("hits").get<std::string>();
        const auto& r = t.at("retrieval");
        c.retrieval.top_k = r.at("top_k").get<std::uint32_t>();
        if (!r.at("identity_ceiling").is_null()) c.retrieval.identity_ceiling = r.at("identity_ceiling").get<double>();
        c.retrieval.exclude_self = r.at("exclude_self").get<bool>();
        c.go_resolution = r.at("go_resolution").get<bool>();
        const auto& ig = t.at("ig");
        c.ig.window = ig.at("window").get<std::uint32_t>();
        c.ig.head_k = ig.at("head_k").get<std::uint32_t>();
        c.ig.omega = ig.at("omega").get<double>();
        c.ig.alpha = ig.at("alpha").get<double>();
        c.ig.tau = ig.at("tau").get<double>();
        const auto& d = t.at("denoise");
        c.denoise.eps = d.at("eps").get<double>();
        c.denoise.min_pts = d.at("min_pts").get<std::uint32_t>();
        c.denoise.metric = parse_distance_metric(d.at("metric").get<std::string>());
        c.denoise.anchor_top_m = d.at("anchor_top_m").get<std::uint32_t>();
        const auto& s = t.at("student");
        c.student.epochs = s.at("epochs").get<std::uint32_t>();
        c.student.learning_rate = s.at("learning_rate").get<double>();
        c.student.batch_size = s.at("batch_size").get<std::uint32_t>();
        c.student.encoder_learning_rate = s.at("encoder_learning_rate").get<double>();
        c.student.seed = c.seed;
        const auto& ds = t.at("distillation");
        c.distillation.per_type = ds.at("per_type").get<std::size_t>();
        c.distillation.train_parts = ds.at("train_parts").get<std::size_t>();
        c.distillation.test_parts = ds.at("test_parts").get<std::size_t>();
        c.distillation.seed = c.seed;
        c.distillation.ig = c.ig;
        const auto& g = t.at("generation");
        c.generation.temperature = g.at("temperature").get<double>();
        c.generation.top_p = g.at("top_p").get<double>();
        c.generation.max_tokens = g.at("max_tokens").get<std::uint32_t>();
        c.generation.presence_penalty = g.at("presence_penalty").get<double>();
        c.generation.frequency_penalty = g.at("frequency_penalty").get<double>();
        const auto& b = t.at("backends");
        read_backend(b.at("scorer"), c.scorer);
        read_backend(b.at("embedder"), c.embedder);
        read_backend(b.at("generator"), c.generator);
        const auto& bl = t.at("blast");
        c.blast.binary = bl.at("binary").get<std::string>();
        c.blast.database = bl.at("db").get<std::string>();
        c.blast.evalue = bl.at("evalue").get<double>();
        c.blast.max_target_seqs = bl.at("max_target_seqs").get<unsigned>();
        c.blast.threads = bl.at("threads").get<unsigned>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid configuration: ") + e.what());
    }
    return c;
}

}  // namespace

ordered_json PipelineConfig::to_tree() const {
    ordered_json t;
    t["mode"] = std::string(to_string(mode));
    t["seed"] = seed;
    t["parallelism"] = parallelism;
    t["paths"] = ordered_json{{"index", paths.index.string()},
                              {"filter_model", paths.filter_model.string()},
                              {"cache", paths.cache.string()},
                              {"hits", paths.hits.string()}};
    t["retrieval"] = ordered_json{{"top_k", retrieval.top_k},
                                  {"identity_ceiling", retrieval.identity_ceiling ? ordered_json(*retrieval.identity_ceiling)
                                                                                   : ordered_json(nullptr)},
                                  {"exclude_self", retrieval.exclude_self},
                                  {"go_resolution", go_resolution}};
    t["ig"] = ordered_json{{"window", ig.window}, {"head_k", ig.head_k}, {"omega", ig.omega}, {"alpha", ig.alpha},
                           {"tau", ig.tau}};
    t["denoise"] = ordered_json{{"eps", denoise.eps},
                                {"min_pts", denoise.min_pts},
                                {"metric", std::string(to_string(denoise.metric))},
                                {"anchor_top_m", denoise.anchor_top_m}};
    t["student"] = ordered_json{{"epochs", student.epochs},
                                {"learning_rate", student.learning_rate},
                                {"batch_size", student.batch_size},
                                {"encoder_learning_rate", student.encoder_learning_rate}};
    t["distillation"] = ordered_json{{"per_type", distillation.per_type},
                                     {"train_parts", distillation.train_parts},
                                     {"test_parts", distillation.test_parts}};
    t["generation"] = ordered_json{{"temperature", generation.temperature},
                                   {"top_p", generation.top_p},
                                   {"max_tokens", generation.max_tokens},
                                   {"presence_penalty", generation.presence_penalty},
                                   {"frequency_penalty", generation.frequency_penalty}};
    t["backends"] = ordered_json{{"scorer", backend_tree(scorer)},
                                 {"embedder", backend_tree(embedder)},
                                 {"generator", backend_tree(generator)}};
    t["blast"] = ordered_json{{"binary", blast.binary},
                              {"db", blast.database},
                              {"evalue", blast.evalue},
                              {"max_target_seqs", blast.max_target_seqs},
                              {"threads", blast.threads}};
    return t;
}

std::string PipelineConfig::digest() const {
    auto t = to_tree();
    t.erase("parallelism");
    t["paths"].erase("cache");
    for (auto& [role, b] : t["backends"].items()) {
        b.erase("timeout_ms");
        b.erase("max_retries");
        b.erase("max_in_flight");
        b.erase("retry_backoff_ms");
    }
    t["code_version"] = std::string(kCodeVersion);
    return sha256_hex(t.dump());
}

PipelineConfig config_from_tree(const json& overrides) {
    auto tree = PipelineConfig{}.to_tree();
    if (!overrides.is_null()) overlay(tree, overrides, "");
    auto cfg = from_tree(tree);
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_tree(j);
}

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        const char* v = std::getenv(name.c_str());
        if (!v || !*v) return std::nullopt;
        return std::string(v);
    };
}

void apply_env_overrides(PipelineConfig& cfg, const EnvLookup& env) {
    const std::pair<const char*, BackendConfig*> roles[] = {
        {"SCORER", &cfg.scorer}, {"EMBEDDER", &cfg.embedder}, {"GENERATOR", &cfg.generator}};
    const auto key = env("PROTRAG_API_KEY");
    for (auto [name, b] : roles) {
        if (auto v = env(std::string("PROTRAG_") + name + "_ENDPOINT")) b->endpoint = *v;
        if (auto v = env(std::string("PROTRAG_") + name + "_MODEL")) b->model = *v;
        if (key) b->api_key = *key;
    }
}

void force_offline(PipelineConfig& cfg) {
    for (auto* b : {&cfg.scorer, &cfg.embedder, &cfg.generator}) {
        if (!b->is_mock()) {
            b->endpoint = default_mock_endpoint(b->role);
            b->model = "mock";
        }
        b->api_key.clear();
    }
}

ordered_json default_parameter_origins() {
    const PipelineConfig d;
    auto entry = [](ordered_json value, const char* origin) {
        return ordered_json{{"value", std::move(value)}, {"origin", origin}};
    };
    return ordered_json{
        {"retrieval.top_k", entry(d.retrieval.top_k, "published")},
        {"retrieval.exclude_self", entry(d.retrieval.exclude_self, "published")},
        {"ig.omega", entry(d.ig.omega, "published")},
        {"ig.tau", entry(d.ig.tau, "published")},
        {"ig.window", entry(d.ig.window, "chosen")},
        {"ig.head_k", entry(d.ig.head_k, "chosen")},
        {"ig.alpha", entry(d.ig.alpha, "chosen")},
        {"generation.temperature", entry(d.generation.temperature, "published")},
        {"generation.top_p", entry(d.generation.top_p, "published")},
        {"generation.max_tokens", entry(d.generation.max_tokens, "published")},
        {"student.epochs", entry(d.student.epochs, "published")},
        {"student.batch_size", entry(d.student.batch_size, "published")},
        {"student.encoder_learning_rate", entry(d.student.encoder_learning_rate, "published")},
        {"student.learning_rate", entry(d.student.learning_rate, "chosen")},
        {"distillation.per_type", entry(d.distillation.per_type, "published")},
        {"denoise.eps", entry(d.denoise.eps, "chosen")},
        {"denoise.min_pts", entry(d.denoise.min_pts, "chosen")},
        {"denoise.metric", entry(std::string(to_string(d.denoise.metric)), "chosen")},
        {"denoise.anchor_top_m", entry(d.denoise.anchor_top_m, "chosen")},
    };
}

// ---------------------------------------------------------------------------
// Hit sources

TableHitSource::TableHitSource(const std::filesystem::path& path) : path_(path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open hits file " + path.string());
    by_query_ = group_by_query(parse_blast_tabular(in, &warnings_));
}

std::vector<HomologHit> TableHitSource::hits_for(const QARecord& record) {
    auto it = by_query_.find(record.id);
    return it == by_query_.end() ? std::vector<HomologHit>{} : it->second;
}

std::string TableHitSource::describe() const { return "table:" + path_.string(); }

BlastHitSource::BlastHitSource(BlastCommand cmd, std::filesystem::path scratch)
    : cmd_(std::move(cmd)), scratch_(std::move(scratch)) {}

std::vector<HomologHit> BlastHitSource::hits_for(const QARecord& record) {
    std::filesystem::create_directories(scratch_);
    const auto stem = scratch_ / sha256_hex(record.id).substr(0, 16);
    const auto fasta = stem.string() + ".fasta";
    const auto out = stem.string() + ".tsv";
    {
        std::ofstream f(fasta);
        f << '>' << record.id << '\n' << record.sequence << '\n';
    }
    run_blast(cmd_, fasta, out);
    std::ifstream in(out);
    auto hits = parse_blast_tabular(in);
    for (auto& h : hits) h.query_id = record.id;
    return hits;
}

std::string BlastHitSource::describe() const {
    return "blast:" + format_command_line(blast_argv(cmd_, "<query.fasta>", "<hits.tsv>"));
}

// ---------------------------------------------------------------------------
// Services

PipelineServices PipelineServices::open(const PipelineConfig& config) {
    config.validate();
    PipelineServices s;
    s.config = config;
    if (config.paths.index.empty()) throw ConfigError("paths.index is required (build one with `index build`)");
    s.index = std::make_shared<AnnotationIndex>(AnnotationIndex::load(config.paths.index));
    if (runs_horizontal(config.mode)) {
        if (config.paths.filter_model.empty())
            throw ConfigError(std::string(to_string(config.mode)) + " needs a filter model (paths.filter_model)");
        std::ifstream in(config.paths.filter_model);
        if (!in) throw ConfigError("cannot open filter model " + config.paths.filter_model.string());
        s.filter = std::make_shared<FilterModel>(FilterModel::load(in));
    }
    if (!config.paths.hits.empty())
        s.hits = std::make_shared<TableHitSource>(config.paths.hits);
    else
        s.hits = std::make_shared<BlastHitSource>(config.blast, std::filesystem::temp_directory_path() / "protrag-blast");

    std::shared_ptr<ResponseCache> cache =
        std::make_shared<ResponseCache>(config.paths.cache.empty() ? std::nullopt
                                                                   : std::optional<std::filesystem::path>(config.paths.cache));
    s.scorer = std::make_shared<BackendClient>(config.scorer, cache);
    s.embedder = std::make_shared<BackendClient>(config.embedder, cache);
    s.generator = std::make_shared<BackendClient>(config.generator, cache);
    return s;
}

EvidencePool retrieve(const PipelineServices& services, const QARecord& record, std::vector<HomologHit>* selected_hits) {
    auto hits = services.hits->hits_for(record);
    for (auto& h : hits) h.query_id = record.id;
    auto ranked = rank_and_select(std::move(hits), services.config.retrieval, record.sequence.size());
    if (selected_hits) *selected_hits = ranked;
    return assemble_raw_pool(ranked, *services.index, services.config.go_resolution);
}

// ---------------------------------------------------------------------------
// Prompt

std::string task_lead(std::string_view task) {
    static const std::map<std::string, std::string, std::less<>> leads{
        {"catalytic_activity", "Describe the catalytic activity of the protein with the sequence below."},
        {"domain_motif", "Identify the domains and motifs of the protein with the sequence below."},
        {"general_function", "Give a general description of the protein with the sequence below."},
        {"general_description", "Give a general description of the protein with the sequence below."},
        {"protein_function", "Describe the function of the protein with the sequence below."},
    };
    auto it = leads.find(task);
    return it != leads.end() ? it->second : "Answer the question about the protein with the sequence below.";
}

std::string build_prompt(const QARecord& record, std::string_view context) {
    std::string p = task_lead(record.task);
    p += "\nInstruction: " + record.instruction;
    p += "\nSequence: " + record.sequence;
    p += "\nEvidence from homologous proteins:\n";
    if (context.empty()) {
        p += kNoEvidenceNote;
        p += '\n';
    } else {
        p += context;
    }
    p += "Answer:";
    return p;
}

// ---------------------------------------------------------------------------
// Artifact JSON

ordered_json hit_to_json(const HomologHit& h) {
    return ordered_json{{"query_id", h.query_id},
                        {"subject_accession", h.subject_accession},
                        {"percent_identity", h.percent_identity},
                        {"alignment_length", h.alignment_length},
                        {"identity_count", h.identity_count},
                        {"e_value", h.e_value},
                        {"bitscore", h.bitscore}};
}

HomologHit hit_from_json(const json& j) {
    HomologHit h;
    h.query_id = j.at("query_id").get<std::string>();
    h.subject_accession = j.at("subject_accession").get<std::string>();
    h.percent_identity = j.at("percent_identity").get<double>();
    h.alignment_length = j.at("alignment_length").get<std::uint32_t>();
    h.identity_count = j.at("identity_count").get<std::uint32_t>();
    h.e_value = j.at("e_value").get<double>();
    h.bitscore = j.at("bitscore").get<double>();
    return h;
}

ordered_json pool_to_json(const EvidencePool& pool) {
    ordered_json homologs = ordered_json::array();
    for (std::size_t i = 0; i < pool.homologs.size(); ++i) {
        const auto& h = pool.homologs[i];
        ordered_json snippets = ordered_json::array();
        for (const auto& s : h.snippets) snippets.push_back(ordered_json{{"tag", s.tag.name()}, {"value", s.value}});
        homologs.push_back(ordered_json{{"rank", i + 1}, {"hit", hit_to_json(h.hit)}, {"snippets", std::move(snippets)}});
    }
    return ordered_json{{"stage", std::string(to_string(pool.stage))},
                        {"homologs", std::move(homologs)},
                        {"warnings", pool.warnings}};
}

EvidencePool pool_from_json(const json& j) {
    EvidencePool pool;
    pool.stage = parse_pool_stage(j.at("stage").get<std::string>());
    for (const auto& h : j.at("homologs")) {
        PoolHomolog ph;
        ph.hit = hit_from_json(h.at("hit"));
        const auto rank = h.at("rank").get<std::uint32_t>();
        for (const auto& s : h.at("snippets"))
            ph.snippets.push_back(AnnotationSnippet{AttributeTag(s.at("tag").get<std::string>()),
                                                    s.at("value").get<std::string>(), ph.hit.subject_accession, rank});
        pool.homologs.push_back(std::move(ph));
    }
    pool.warnings = j.at("warnings").get<std::vector<std::string>>();
    pool.check_invariants();
    return pool;
}

std::string RunArtifact::serialize() const { return doc.dump(2) + "\n"; }

namespace {

ordered_json record_json(const QARecord& r) {
    ordered_json j{{"id", r.id}, {"instruction", r.instruction}, {"sequence", r.sequence}};
    j["answer"] = r.answer ? ordered_json(*r.answer) : ordered_json(nullptr);
    j["task"] = r.task;
    j["instruction_type"] = r.instruction_type;
    return j;
}

ordered_json clusters_json(const ClusterSet& cs, const AnchorSelection& sel) {
    ordered_json clusters = ordered_json::array();
    for (const auto& c : cs.clusters) clusters.push_back(c.members);
    return ordered_json{{"clusters", std::move(clusters)},
                        {"noise", cs.noise},
                        {"anchor_ranks", sel.anchor_ranks},
                        {"selected_clusters", sel.cluster_ids},
                        {"selected", sel.selected},
                        {"pass_through", sel.pass_through}};
}

class StageTimer {
public:
    explicit StageTimer(std::map<std::string, double>& sink, std::string name)
        : sink_(sink), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
    ~StageTimer() {
        sink_[name_] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::map<std::string, double>& sink_;
    std::string name_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace

RunArtifact run_query(const PipelineServices& services, const QARecord& record) {
    const auto& cfg = services.config;
    RunArtifact art;
    auto& doc = art.doc;
    ordered_json errors = ordered_json::array();
    auto record_error = [&](const char* stage, const std::exception& e) {
        errors.push_back(ordered_json{{"stage", stage}, {"message", e.what()}});
    };

    doc["record"] = record_json(record);
    doc["metadata"] = ordered_json{{"code_version", std::string(kCodeVersion)},
                                   {"config_digest", cfg.digest()},
                                   {"seed", cfg.seed},
                                   {"mode", std::string(to_string(cfg.mode))},
                                   {"hit_source", services.hits ? services.hits->describe() : std::string("none")},
                                   {"retrieval", cfg.to_tree()["retrieval"]},
                                   {"denoise", cfg.to_tree()["denoise"]},
                                   {"generation", cfg.to_tree()["generation"]},
                                   {"defaults", default_parameter_origins()}};

    EvidencePool pool;
    std::vector<HomologHit> hits;
    {
        StageTimer t(art.timings_ms, "retrieval");
        try {
            pool = retrieve(services, record, &hits);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            record_error("retrieval", e);
        }
    }
    ordered_json hits_json = ordered_json::array();
    for (const auto& h : hits) hits_json.push_back(hit_to_json(h));
    doc["hits"] = std::move(hits_json);
    doc["pools"] = ordered_json::object();
    doc["pools"]["RAW"] = pool_to_json(pool);

    if (runs_horizontal(cfg.mode)) {
        StageTimer t(art.timings_ms, "horizontal");
        try {
            if (!services.filter) throw ConfigError("horizontal filtering needs a filter model");
            pool = gate(pool, *services.filter, record.instruction);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            record_error("horizontal", e);
            pool = EvidencePool{PoolStage::Horizontal, {}, pool.warnings};
        }
        doc["pools"]["HORIZONTAL"] = pool_to_json(pool);
    }

    std::string context;
    if (runs_vertical(cfg.mode)) {
        StageTimer t(art.timings_ms, "vertical");
        try {
            auto result = denoise(pool, *services.embedder, cfg.denoise);
            doc["clusters"] = clusters_json(result.clusters, result.selection);
            pool = std::move(result.context.pool);
            context = std::move(result.context.text);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            record_error("vertical", e);
            pool = EvidencePool{PoolStage::Vertical, {}, pool.warnings};
            context.clear();
        }
        doc["pools"]["VERTICAL"] = pool_to_json(pool);
    } else {
        context = render_context(pool);
    }

    doc["context"] = context;
    doc["fallback"] = context.empty();
    const auto prompt = build_prompt(record, context);
    doc["prompt"] = prompt;
    {
        StageTimer t(art.timings_ms, "generation");
        try {
            doc["answer"] = services.generator->generate(prompt, cfg.generation);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            record_error("generation", e);
            doc["answer"] = nullptr;
        }
    }
    doc["errors"] = std::move(errors);
    return art;
}

std::string replay_context(const json& artifact) {
    const auto& pools = artifact.at("pools");
    const auto mode = parse_ablation_mode(artifact.at("metadata").at("mode").get<std::string>());
    if (!runs_vertical(mode)) {
        const char* last = runs_horizontal(mode) ? "HORIZONTAL" : "RAW";
        return render_context(pool_from_json(pools.at(last)));
    }
    if (!artifact.contains("clusters")) return std::string{};
    const auto input = pool_from_json(pools.at(runs_horizontal(mode) ? "HORIZONTAL" : "RAW"));
    const auto& c = artifact.at("clusters");
    ClusterSet cs;
    std::size_t id = 0;
    for (const auto& members : c.at("clusters"))
        cs.clusters.push_back(SemanticCluster{id++, members.get<std::vector<std::size_t>>()});
    cs.noise = c.at("noise").get<std::vector<std::size_t>>();
    const auto anchor_top_m = artifact.at("metadata").at("denoise").at("anchor_top_m").get<std::uint32_t>();
    const auto sel = select_anchor_clusters(cs, input, anchor_top_m);
    return assemble_context(input, sel).text;
}

// ---------------------------------------------------------------------------
// Batch

ordered_json BatchSummary::to_json() const {
    return ordered_json{{"records", records},
                        {"computed", computed},
                        {"resumed", resumed},
                        {"artifacts", computed + resumed},
                        {"skipped", skipped},
                        {"records_with_stage_errors", failed_stages},
                        {"skipped_details", skipped_details},
                        {"config_digest", config_digest}};
}

std::string artifact_file_name(std::string_view record_id) {
    const bool safe = !record_id.empty() && record_id.front() != '.' &&
                      std::all_of(record_id.begin(), record_id.end(), [](char c) {
                          return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
                      }) &&
                      record_id != "summary" && !record_id.ends_with(".timings");
    if (safe) return std::string(record_id) + ".json";
    std::string cleaned;
    for (char c : record_id) cleaned += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
    return cleaned.substr(0, 48) + "-" + sha256_hex(record_id).substr(0, 12) + ".json";
}

namespace {

void write_atomically(const std::filesystem::path& path, const std::string& content) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp);
        out << content;
        if (!out) throw Error("write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

bool reusable(const std::filesystem::path& path, const std::string& digest) {
    std::ifstream in(path);
    if (!in) return false;
    try {
        const auto j = json::parse(in);
        return j.at("metadata").at("config_digest").get<std::string>() == digest;
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace

BatchSummary run_batch(const PipelineServices& services, const std::filesystem::path& dataset,
                       const std::filesystem::path& out_dir) {
    std::ifstream in(dataset);
    if (!in) throw Error("cannot open dataset " + dataset.string());
    auto data = read_dataset(in);

    BatchSummary summary;
    summary.config_digest = services.config.digest();
    summary.skipped_details = data.skipped;
    std::vector<QARecord> records;
    std::set<std::string> seen;
    for (auto& r : data.records) {
        if (!seen.insert(r.id).second) {
            summary.skipped_details.push_back("id " + r.id + ": duplicate record id");
            continue;
        }
        records.push_back(std::move(r));
    }
    summary.skipped = summary.skipped_details.size();
    summary.records = records.size() + summary.skipped;

    std::filesystem::create_directories(out_dir);
    std::atomic<std::size_t> next{0}, computed{0}, resumed{0}, failed{0};
    std::mutex error_mutex;
    std::exception_ptr fatal;
    auto worker = [&] {
        for (;;) {
            const auto i = next.fetch_add(1);
            if (i >= records.size()) return;
            {
                std::lock_guard lock(error_mutex);
                if (fatal) return;
            }
            const auto& r = records[i];
            const auto path = out_dir / artifact_file_name(r.id);
            if (reusable(path, summary.config_digest)) {
                ++resumed;
                continue;
            }
            try {
                auto art = run_query(services, r);
                if (!art.doc["errors"].empty()) ++failed;
                ordered_json timings(art.timings_ms);
                write_atomically(path, art.serialize());
                auto tpath = path;
                tpath.replace_extension(".timings.json");
                write_atomically(tpath, timings.dump(2) + "\n");
                ++computed;
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!fatal) fatal = std::current_exception();
                return;
            }
        }
    };
    const auto n = std::min<std::size_t>(services.config.parallelism, std::max<std::size_t>(records.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (fatal) std::rethrow_exception(fatal);

    summary.computed = computed;
    summary.resumed = resumed;
    summary.failed_stages = failed;
    write_atomically(out_dir / "summary.json", summary.to_json().dump(2) + "\n");
    return summary;
}

eval::MetricReport run_eval(const std::filesystem::path& artifact_dir, const eval::EntityLexicon& lexicon) {
    if (!std::filesystem::is_directory(artifact_dir)) throw Error("artifact directory " + artifact_dir.string() + " does not exist");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(artifact_dir)) {
        const auto name = e.path().filename().string();
        if (!e.is_regular_file() || !name.ends_with(".json") || name == "summary.json" || name.ends_with(".timings.json"))
            continue;
        files.push_back(e.path());
    }
    if (files.empty()) throw Error("no artifacts found in " + artifact_dir.string());
    std::sort(files.begin(), files.end());

    std::vector<eval::RecordScores> scores;
    std::size_t missing = 0;
    for (const auto& f : files) {
        std::ifstream in(f);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw Error("artifact " + f.string() + " is not valid JSON: " + e.what());
        }
        const auto& rec = j.at("record");
        if (rec.at("answer").is_null() || j.at("answer").is_null()) {
            ++missing;
            continue;
        }
        scores.push_back(eval::score_record(rec.at("id").get<std::string>(), rec.at("task").get<std::string>(),
                                            j.at("answer").get<std::string>(), rec.at("answer").get<std::string>(),
                                            lexicon));
    }
    if (scores.empty()) throw Error("no artifact in " + artifact_dir.string() + " has both a reference and an answer");
    auto report = eval::aggregate(std::move(scores));
    report.missing_reference_excluded = missing;
    return report;
}

}  // namespace protrag
