#include "protrag/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "protrag/error.hpp"
#include "protrag/pipeline.hpp"
#include "protrag/text.hpp"

namespace protrag::cli {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

struct GlobalOptions {
    std::string config;
    bool offline = false;
    std::optional<std::uint64_t> seed;
    std::string index;
    std::string filter_model;
    std::string hits;
    std::string mode;
    std::string cache;
};

PipelineConfig resolve_config(const GlobalOptions& g) {
    auto cfg = g.config.empty() ? config_from_tree(json(nullptr)) : load_config(g.config);
    apply_env_overrides(cfg, process_env());
    if (g.seed) {
        cfg.seed = *g.seed;
        cfg.student.seed = *g.seed;
        cfg.distillation.seed = *g.seed;
    }
    if (!g.index.empty()) cfg.paths.index = g.index;
    if (!g.filter_model.empty()) cfg.paths.filter_model = g.filter_model;
    if (!g.hits.empty()) cfg.paths.hits = g.hits;
    if (!g.cache.empty()) cfg.paths.cache = g.cache;
    if (!g.mode.empty()) cfg.mode = parse_ablation_mode(g.mode);
    if (g.offline) force_offline(cfg);
    cfg.distillation.ig = cfg.ig;
    cfg.validate();
    return cfg;
}

std::vector<QARecord> load_dataset(const std::string& path, std::ostream& err) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset " + path);
    auto data = read_dataset(in);
    for (const auto& s : data.skipped) err << "skipped " << s << '\n';
    return std::move(data.records);
}

void write_text(const std::string& path, const std::string& content, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << content;
        return;
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + path);
    f << content;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Protein question answering with filtered homolog evidence"};
    app.require_subcommand(1);
    GlobalOptions g;
    app.add_option("--config", g.config, "JSON configuration file");
    app.add_flag("--offline", g.offline, "Use mock backends for every model role");
    app.add_option("--seed", g.seed, "Seed for every randomized step");
    app.add_option("--index", g.index, "Annotation index directory");
    app.add_option("--filter-model", g.filter_model, "Trained filter model file");
    app.add_option("--hits", g.hits, "Precomputed BLAST tabular hits (skips running BLAST)");
    app.add_option("--mode", g.mode, "RAW_ONLY | HORIZONTAL_ONLY | VERTICAL_ONLY | FULL_2D");
    app.add_option("--cache", g.cache, "Backend response cache directory");

    std::function<void()> action;

    // index
    auto* index = app.add_subcommand("index", "Build or query the annotation index");
    index->require_subcommand(1);
    std::string dat, go, index_out;
    auto* index_build = index->add_subcommand("build", "Index a Swiss-Prot flat file");
    index_build->add_option("--dat", dat, "Swiss-Prot flat file")->required();
    index_build->add_option("--go", go, "GO ontology (OBO)");
    index_build->add_option("--out", index_out, "Output directory")->required();
    index_build->callback([&] {
        action = [&] {
            auto idx = AnnotationIndex::build(dat, go);
            idx.save(index_out);
            out << "indexed " << idx.record_count() << " records, " << idx.go_term_count() << " GO terms into "
                << index_out << '\n';
        };
    });
    std::string accession;
    auto* index_lookup = index->add_subcommand("lookup", "Print the snippets of one accession");
    index_lookup->add_option("accession", accession)->required();
    index_lookup->callback([&] {
        action = [&] {
            const auto cfg = resolve_config(g);
            if (cfg.paths.index.empty()) throw ConfigError("--index is required");
            out << dump_entry(AnnotationIndex::load(cfg.paths.index).lookup(accession));
        };
    });

    // retrieve
    std::string dataset, retrieve_out;
    auto* retrieve_cmd = app.add_subcommand("retrieve", "Rank homologs and assemble RAW evidence pools");
    retrieve_cmd->add_option("--dataset", dataset, "Line-delimited records")->required();
    retrieve_cmd->add_option("--out", retrieve_out, "Output JSONL (default stdout)");
    retrieve_cmd->callback([&] {
        action = [&] {
            auto cfg = resolve_config(g);
            cfg.mode = AblationMode::RawOnly;
            const auto services = PipelineServices::open(cfg);
            std::string text;
            for (const auto& r : load_dataset(dataset, err)) {
                std::vector<HomologHit> hits;
                const auto pool = retrieve(services, r, &hits);
                ordered_json hj = ordered_json::array();
                for (const auto& h : hits) hj.push_back(hit_to_json(h));
                text += ordered_json{{"id", r.id}, {"hits", hj}, {"pool", pool_to_json(pool)}}.dump() + "\n";
            }
            write_text(retrieve_out, text, out);
        };
    });

    // filter
    auto* filter = app.add_subcommand("filter", "Horizontal filter: teacher labels, student training, scoring");
    filter->require_subcommand(1);
    std::string label_dir;
    auto* filter_label = filter->add_subcommand("label", "Label snippets with segment-wise information gain");
    filter_label->add_option("--dataset", dataset, "Line-delimited records with answers")->required();
    filter_label->add_option("--out-dir", label_dir, "Directory for train.jsonl and test.jsonl")->required();
    filter_label->callback([&] {
        action = [&] {
            auto cfg = resolve_config(g);
            cfg.mode = AblationMode::RawOnly;
            const auto services = PipelineServices::open(cfg);
            const auto records = load_dataset(dataset, err);
            SnippetSource source = [&](const QARecord& r) { return retrieve(services, r).flatten(); };
            const auto split = build_distillation_set(records, source, *services.scorer, cfg.distillation);
            std::filesystem::create_directories(label_dir);
            std::ofstream train(std::filesystem::path(label_dir) / "train.jsonl");
            write_examples(train, split.train);
            std::ofstream test(std::filesystem::path(label_dir) / "test.jsonl");
            write_examples(test, split.test);
            out << "labeled " << split.train.size() << " train and " << split.test.size() << " test examples\n";
        };
    });
    std::string examples_path, test_path, model_out;
    auto* filter_train = filter->add_subcommand("train", "Train the student relevance model");
    filter_train->add_option("--examples", examples_path, "Training examples (JSONL)")->required();
    filter_train->add_option("--test", test_path, "Held-out examples (JSONL)");
    filter_train->add_option("--out", model_out, "Model file")->required();
    filter_train->callback([&] {
        action = [&] {
            const auto cfg = resolve_config(g);
            std::ifstream in(examples_path);
            if (!in) throw Error("cannot open " + examples_path);
            const auto examples = read_examples(in);
            TrainReport report;
            const auto model = train_filter(examples, cfg.student, &report);
            std::ofstream f(model_out, std::ios::trunc);
            if (!f) throw Error("cannot write " + model_out);
            model.save(f);
            for (std::size_t e = 0; e < report.epoch_losses.size(); ++e)
                out << "epoch " << e << " loss " << text::format_fixed(report.epoch_losses[e], 6) << '\n';
            out << "train accuracy " << text::format_fixed(accuracy(model, examples), 4) << '\n';
            if (!test_path.empty()) {
                std::ifstream tin(test_path);
                if (!tin) throw Error("cannot open " + test_path);
                const auto test = read_examples(tin);
                out << "test accuracy " << text::format_fixed(accuracy(model, test), 4) << '\n';
            }
        };
    });
    std::string instruction, tag;
    auto* filter_score = filter->add_subcommand("score", "Relevance of a tag for an instruction");
    filter_score->add_option("--instruction", instruction)->required();
    filter_score->add_option("--tag", tag)->required();
    filter_score->callback([&] {
        action = [&] {
            const auto cfg = resolve_config(g);
            if (cfg.paths.filter_model.empty()) throw ConfigError("--filter-model is required");
            std::ifstream in(cfg.paths.filter_model);
            if (!in) throw Error("cannot open " + cfg.paths.filter_model.string());
            const auto model = FilterModel::load(in);
            const double s = model.score(instruction, AttributeTag(tag));
            out << text::format_fixed(s, 6) << (s > kGateThreshold ? " keep" : " drop") << '\n';
        };
    });

    // denoise
    std::string pool_path, denoise_out, metric;
    std::optional<double> eps;
    std::optional<std::uint32_t> min_pts, anchor_top;
    auto* denoise_cmd = app.add_subcommand("denoise", "Cluster a stored pool and keep the anchored clusters");
    denoise_cmd->add_option("--pool", pool_path, "Pool JSON (RAW or HORIZONTAL)")->required();
    denoise_cmd->add_option("--eps", eps);
    denoise_cmd->add_option("--min-pts", min_pts);
    denoise_cmd->add_option("--anchor-top", anchor_top);
    denoise_cmd->add_option("--metric", metric, "cosine | euclidean");
    denoise_cmd->add_option("--out", denoise_out, "Write the VERTICAL pool JSON here");
    denoise_cmd->callback([&] {
        action = [&] {
            auto cfg = resolve_config(g);
            if (eps) cfg.denoise.eps = *eps;
            if (min_pts) cfg.denoise.min_pts = *min_pts;
            if (anchor_top) cfg.denoise.anchor_top_m = *anchor_top;
            if (!metric.empty()) cfg.denoise.metric = parse_distance_metric(metric);
            cfg.denoise.validate();
            std::ifstream in(pool_path);
            if (!in) throw Error("cannot open " + pool_path);
            json j = json::parse(in);
            // Accept a bare pool or a `retrieve` output line.
            const auto pool = pool_from_json(j.contains("pool") ? j.at("pool") : j);
            BackendClient embedder(cfg.embedder);
            const auto result = denoise(pool, embedder, cfg.denoise);
            for (const auto& w : result.selection.warnings) err << "warning: " << w << '\n';
            out << result.context.text;
            if (!denoise_out.empty()) write_text(denoise_out, pool_to_json(result.context.pool).dump(2) + "\n", out);
        };
    });

    // qa
    auto* qa = app.add_subcommand("qa", "Answer questions");
    qa->require_subcommand(1);
    std::string record_id, qa_out;
    auto* qa_run = qa->add_subcommand("run", "Run the pipeline on one record");
    qa_run->add_option("--dataset", dataset, "Line-delimited records")->required();
    qa_run->add_option("--id", record_id, "Record id (default: first record)");
    qa_run->add_option("--out", qa_out, "Artifact path (default stdout)");
    qa_run->callback([&] {
        action = [&] {
            const auto services = PipelineServices::open(resolve_config(g));
            const auto records = load_dataset(dataset, err);
            auto it = std::find_if(records.begin(), records.end(),
                                   [&](const QARecord& r) { return record_id.empty() || r.id == record_id; });
            if (it == records.end()) throw NotFoundError("record '" + record_id + "' not in " + dataset);
            write_text(qa_out, run_query(services, *it).serialize(), out);
        };
    });
    std::string batch_out;
    auto* qa_batch = qa->add_subcommand("batch", "Run the pipeline on a dataset (resumable)");
    qa_batch->add_option("--dataset", dataset, "Line-delimited records")->required();
    qa_batch->add_option("--out", batch_out, "Artifact directory")->required();
    qa_batch->callback([&] {
        action = [&] {
            const auto services = PipelineServices::open(resolve_config(g));
            const auto s = run_batch(services, dataset, batch_out);
            for (const auto& d : s.skipped_details) err << "skipped " << d << '\n';
            out << "computed " << s.computed << ", resumed " << s.resumed << ", skipped " << s.skipped << '\n';
        };
    });
    std::string artifacts, lexicon_path, eval_out;
    bool go_lexicon = false;
    auto* qa_eval = qa->add_subcommand("eval", "Score artifacts against their references");
    qa_eval->add_option("--artifacts", artifacts, "Artifact directory")->required();
    qa_eval->add_option("--lexicon", lexicon_path, "Entity lexicon, one surface form per line");
    qa_eval->add_flag("--go-lexicon", go_lexicon, "Add GO term names from --index to the lexicon");
    qa_eval->add_option("--out", eval_out, "Write per-record and per-task JSONL here");
    qa_eval->callback([&] {
        action = [&] {
            eval::EntityLexicon lexicon;
            if (!lexicon_path.empty()) lexicon = eval::EntityLexicon::load(lexicon_path);
            if (go_lexicon) {
                const auto cfg = resolve_config(g);
                if (cfg.paths.index.empty()) throw ConfigError("--go-lexicon needs --index");
                const auto terms = AnnotationIndex::load(cfg.paths.index).go_terms();
                lexicon.merge(eval::EntityLexicon::from_go_terms(terms));
            }
            if (lexicon.empty()) err << "warning: entity lexicon is empty; E-BLEU columns will be blank\n";
            const auto report = run_eval(artifacts, lexicon);
            out << eval::render_table(report);
            if (!eval_out.empty()) write_text(eval_out, eval::render_jsonl(report), out);
        };
    });

    // blast
    auto* blast = app.add_subcommand("blast", "Run BLAST+ to produce a hits table");
    blast->require_subcommand(1);
    std::string query_fasta, hits_out, db, binary;
    auto* blast_run = blast->add_subcommand("run", "blastp against a protein database");
    blast_run->add_option("--query", query_fasta, "Query FASTA")->required();
    blast_run->add_option("--out", hits_out, "Hits table")->required();
    blast_run->add_option("--db", db, "BLAST database (overrides blast.db)");
    blast_run->add_option("--binary", binary, "blastp executable (overrides blast.binary)");
    blast_run->callback([&] {
        action = [&] {
            auto cfg = resolve_config(g);
            if (!db.empty()) cfg.blast.database = db;
            if (!binary.empty()) cfg.blast.binary = binary;
            const auto result = run_blast(cfg.blast, query_fasta, hits_out);
            out << result.command_line << '\n';
        };
    });

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (action) action();
        return 0;
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace protrag::cli
