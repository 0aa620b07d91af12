/*
 * siamese3dmm - Siamese 3DMM parameter regression at desk scale.
 *
 * File: tools/s3dmm_cli.cpp
 *
 * Copyright 2026 The siamese3dmm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "s3dmm/errors.hpp"
#include "s3dmm/evaluation.hpp"
#include "s3dmm/morphable_model.hpp"
#include "s3dmm/regressor.hpp"
#include "s3dmm/synth_data.hpp"
#include "s3dmm/tables.hpp"
#include "s3dmm/trainer.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <climits>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#ifndef S3DMM_VERSION
#define S3DMM_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace s3dmm;

namespace {

// Help-string tags: published value vs. local choice.
constexpr const char* kPublished = " [published value]";
constexpr const char* kLocal = " [local choice]";

void ensure_parent(const fs::path& p)
{
    if (p.has_parent_path())
        fs::create_directories(p.parent_path());
}

// Manifests carry no timestamps or host details so reruns compare byte for byte.
void write_manifest(const fs::path& path, const std::string& command, std::uint64_t seed, json config, json inputs,
                    json outputs)
{
    json m;
    m["command"] = command;
    m["version"] = S3DMM_VERSION;
    m["seed"] = seed;
    m["config"] = std::move(config);
    m["inputs"] = std::move(inputs);
    m["outputs"] = std::move(outputs);
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << m.dump(2) << '\n';
    if (!out)
        throw std::runtime_error("failed writing '" + path.string() + "'");
}

fs::path with_suffix(const fs::path& p, const std::string& suffix) { return fs::path(p.string() + suffix); }

Dataset select_split(const Dataset& ds, const std::string& split)
{
    if (split == "all")
        return ds;
    Dataset out = ds.subset(split_from_string(split));
    if (out.samples.empty())
        throw InvalidInput("dataset has no samples in split '" + split + "'");
    return out;
}

void check_basis_matches(const Dataset& ds, const MorphableBasis& basis)
{
    if (!ds.basis_id.empty() && ds.basis_id != "-" && ds.basis_id != basis_fingerprint(basis))
        throw InvalidInput("dataset was generated from basis " + ds.basis_id + ", but the given basis is "
                           + basis_fingerprint(basis));
    if (ds.landmark_count != basis.landmark_count())
        throw InvalidInput("dataset has " + std::to_string(ds.landmark_count) + " landmarks, basis has "
                           + std::to_string(basis.landmark_count()));
}

// ---- synth ----------------------------------------------------------------------

struct SynthOptions
{
    int identities = 50;
    int poses = 20;
    double noise = 0.01;
    std::uint64_t seed = 1;
    int vertices = 300;
    int landmarks = 68;
    double val_fraction = 0.2;
    std::string basis_out, data_out;
};

void add_synth(CLI::App& app, SynthOptions& o)
{
    auto* c = app.add_subcommand("synth", "Generate a synthetic basis and an identity/pose dataset");
    c->add_option("--identities", o.identities, std::string("Number of identities K (>= 2)") + kLocal)
        ->check(CLI::Range(2, INT_MAX))
        ->capture_default_str();
    c->add_option("--poses", o.poses, std::string("Samples per identity M") + kLocal)
        ->check(CLI::Range(1, INT_MAX))
        ->capture_default_str();
    c->add_option("--noise", o.noise, std::string("Landmark noise std") + kLocal)
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    c->add_option("--seed", o.seed, std::string("Random seed") + kLocal)->capture_default_str();
    c->add_option("--vertices", o.vertices, std::string("Basis vertex count N") + kLocal)
        ->check(CLI::Range(1, INT_MAX))
        ->capture_default_str();
    c->add_option("--landmarks", o.landmarks, std::string("Landmark count L") + kLocal)
        ->check(CLI::Range(1, INT_MAX))
        ->capture_default_str();
    c->add_option("--val-fraction", o.val_fraction,
                  std::string("Fraction of identities tagged validation") + kLocal)
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    c->add_option("--basis-out", o.basis_out, "Basis file to write")->required();
    c->add_option("--data-out", o.data_out, "Dataset file to write")->required();
}

int run_synth(const SynthOptions& o)
{
    const MorphableBasis basis = make_synthetic_basis(o.vertices, o.landmarks, mix_seed(o.seed, 1));
    const Dataset ds =
        split_by_identity(generate_dataset(basis, o.identities, o.poses, o.noise, mix_seed(o.seed, 2)), o.val_fraction,
                          mix_seed(o.seed, 3));
    ensure_parent(o.basis_out);
    ensure_parent(o.data_out);
    save_basis(basis, o.basis_out);
    write_dataset(ds, o.data_out);

    const std::size_t n_val = ds.subset(Split::validation).identities().size();
    json cfg = {{"identities", o.identities}, {"poses", o.poses},         {"noise", o.noise},
                {"vertices", o.vertices},     {"landmarks", o.landmarks}, {"val_fraction", o.val_fraction}};
    write_manifest(with_suffix(o.data_out, ".manifest.json"), "synth", o.seed, cfg, json::object(),
                   {{"basis", o.basis_out}, {"data", o.data_out}, {"basis_fingerprint", basis_fingerprint(basis)}});
    std::printf("synth: %zu samples (%d identities x %d poses, %zu validation identities), %d vertices, %d landmarks\n",
                ds.samples.size(), o.identities, o.poses, n_val, o.vertices, o.landmarks);
    return 0;
}

// ---- train ----------------------------------------------------------------------

struct TrainOptions
{
    std::string data, basis, model_out, trace_out;
    int stage1_epochs = 30;
    int stage2_epochs = 30;
    int batch = 32;
    double margin = 1.0;
    double w3d = 1e-2, wshp = 1e-3, wid = 1e-4;
    double gamma = 0.95;
    double genuine_prob = 0.5;
    int pairs_per_epoch = 0;
    std::uint64_t seed = 1;
    std::vector<int> hidden{128, 128};
    int embed_dim = 64;
    std::string activation = "tanh";
    bool normalize_embeddings = false;
    bool symmetric_impostor = false;
    double whiten_floor = 1e-5;
};

void add_train(CLI::App& app, TrainOptions& o)
{
    auto* c = app.add_subcommand("train", "Two-stage Siamese training of the regressor");
    c->add_option("--data", o.data, "Dataset file (trains on samples tagged train)")->required()->check(CLI::ExistingFile);
    c->add_option("--basis", o.basis, "Basis file the dataset was generated from")->required()->check(CLI::ExistingFile);
    c->add_option("--model-out", o.model_out, "Model file to write")->required();
    c->add_option("--trace-out", o.trace_out, "Per-epoch loss trace table to write")->required();
    c->add_option("--stage1-epochs", o.stage1_epochs, std::string("Epochs on the 3d term only") + kLocal)
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    c->add_option("--stage2-epochs", o.stage2_epochs, std::string("Epochs on the full loss") + kLocal)
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    c->add_option("--batch", o.batch, std::string("Pairs per SGD step") + kPublished)
        ->check(CLI::Range(1, INT_MAX))
        ->capture_default_str();
    c->add_option("--margin", o.margin, std::string("Contrastive margin m") + kLocal)
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c->add_option("--w3d", o.w3d, std::string("Weight of the 3d (WPDC) term") + kPublished)
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    c->add_option("--wshp", o.wshp, std::string("Weight of the contrastive shape term") + kPublished)
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    c->add_option("--wid", o.wid, std::string("Weight of the contrastive identity term") + kPublished)
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    c->add_option("--gamma", o.gamma, std::string("Per-epoch decay of the weights") + kLocal)
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    c->add_option("--genuine-prob", o.genuine_prob, std::string("Probability a drawn pair is genuine") + kPublished)
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    c->add_option("--pairs-per-epoch", o.pairs_per_epoch,
                  std::string("Pairs drawn per epoch, 0 = half the training samples") + kLocal)
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    c->add_option("--seed", o.seed, std::string("Seed for initialization and pair sampling") + kLocal)
        ->capture_default_str();
    c->add_option("--hidden", o.hidden, std::string("Hidden layer widths, comma separated") + kLocal)
        ->delimiter(',')
        ->capture_default_str();
    c->add_option("--embed-dim", o.embed_dim, std::string("Identity embedding width") + kLocal)
        ->check(CLI::Range(1, INT_MAX))
        ->capture_default_str();
    c->add_option("--activation", o.activation, std::string("Trunk nonlinearity") + kLocal)
        ->check(CLI::IsMember({"tanh", "relu", "identity"}))
        ->capture_default_str();
    c->add_flag("--normalize-embeddings", o.normalize_embeddings,
                std::string("L2-normalize embeddings before the identity distance") + kLocal);
    c->add_flag("--symmetric-impostor", o.symmetric_impostor,
                std::string("Use 1/2 (m - d)^2 for impostor pairs") + kLocal);
    c->add_option("--whiten-floor", o.whiten_floor,
                  std::string("Input whitening eigenvalue floor, relative to the largest") + kLocal)
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
}

int run_train(const TrainOptions& o)
{
    const MorphableBasis basis = load_basis(o.basis);
    const Dataset ds = read_dataset(o.data);
    check_basis_matches(ds, basis);
    const Dataset train_set = ds.subset(Split::train);
    if (train_set.samples.empty())
        throw InvalidInput("dataset has no samples tagged train");

    std::vector<int> sizes{2 * ds.landmark_count};
    sizes.insert(sizes.end(), o.hidden.begin(), o.hidden.end());
    RegressorModel model =
        RegressorModel::initialized(sizes, o.embed_dim, activation_from_string(o.activation), mix_seed(o.seed, 1));
    fit_input_normalization(model, train_set.observations(), o.whiten_floor);

    TrainConfig cfg;
    cfg.batch_size = o.batch;
    cfg.stage1_epochs = o.stage1_epochs;
    cfg.stage2_epochs = o.stage2_epochs;
    cfg.seed = o.seed;
    cfg.genuine_prob = o.genuine_prob;
    cfg.pairs_per_epoch = o.pairs_per_epoch;
    cfg.loss.margin = o.margin;
    cfg.loss.w_3d = o.w3d;
    cfg.loss.w_shp = o.wshp;
    cfg.loss.w_id = o.wid;
    cfg.loss.gamma = o.gamma;
    cfg.loss.normalize_embeddings = o.normalize_embeddings;
    cfg.loss.symmetric_impostor = o.symmetric_impostor;

    const TrainResult result = train(std::move(model), ds, basis, cfg);
    ensure_parent(o.model_out);
    ensure_parent(o.trace_out);
    save_model(result.model, o.model_out);
    write_trace_csv(result.trace, o.trace_out);

    json c = {{"stage1_epochs", o.stage1_epochs},
              {"stage2_epochs", o.stage2_epochs},
              {"batch", o.batch},
              {"margin", o.margin},
              {"w3d", o.w3d},
              {"wshp", o.wshp},
              {"wid", o.wid},
              {"gamma", o.gamma},
              {"genuine_prob", o.genuine_prob},
              {"pairs_per_epoch", o.pairs_per_epoch},
              {"restart_decay_each_stage", cfg.restart_decay_each_stage},
              {"layer_sizes", sizes},
              {"embed_dim", o.embed_dim},
              {"activation", o.activation},
              {"normalize_embeddings", o.normalize_embeddings},
              {"symmetric_impostor", o.symmetric_impostor},
              {"whiten_floor", o.whiten_floor}};
    write_manifest(with_suffix(o.model_out, ".manifest.json"), "train", o.seed, c,
                   {{"data", o.data}, {"basis", o.basis}}, {{"model", o.model_out}, {"trace", o.trace_out}});
    if (!result.trace.empty())
    {
        const auto& last = result.trace.back();
        std::printf("train: %zu epochs on %zu samples; last epoch l3d %.6g lshp %.6g lid %.6g\n", result.trace.size(),
                    train_set.samples.size(), last.mean_parts.l3d, last.mean_parts.lshp, last.mean_parts.lid);
    }
    return 0;
}

// ---- eval-recon -----------------------------------------------------------------

struct ReconOptions
{
    std::string model, data, basis, out_prefix;
    std::string split = "validation";
    bool oracle = false;
    int edc_points = 101;
};

void add_recon(CLI::App& app, ReconOptions& o)
{
    auto* c = app.add_subcommand("eval-recon", "Per-sample NME after rigid alignment; box stats and EDC tables");
    auto* model = c->add_option("--model", o.model, "Model file")->check(CLI::ExistingFile);
    auto* oracle = c->add_flag("--oracle", o.oracle, "Use the ground-truth parameters instead of a model");
    model->excludes(oracle);
    c->add_option("--data", o.data, "Dataset file")->required()->check(CLI::ExistingFile);
    c->add_option("--basis", o.basis, "Basis file")->required()->check(CLI::ExistingFile);
    c->add_option("--out-prefix", o.out_prefix, "Prefix for records.csv, boxstats.csv, edc.csv, manifest.json")
        ->required();
    c->add_option("--split", o.split, std::string("Samples to evaluate") + kLocal)
        ->check(CLI::IsMember({"all", "train", "validation"}))
        ->capture_default_str();
    c->add_option("--edc-points", o.edc_points, std::string("Thresholds in the EDC table") + kLocal)
        ->check(CLI::Range(2, INT_MAX))
        ->capture_default_str();
}

int run_recon(const ReconOptions& o)
{
    if (!o.oracle && o.model.empty())
        throw InvalidInput("eval-recon needs --model or --oracle");
    const MorphableBasis basis = load_basis(o.basis);
    const Dataset ds = select_split(read_dataset(o.data), o.split);
    check_basis_matches(ds, basis);

    std::vector<EvalRecord> records;
    if (o.oracle)
    {
        std::vector<Vec> gt;
        for (const auto& s : ds.samples)
            gt.push_back(s.params_gt);
        records = reconstruction_eval(gt, ds, basis);
    }
    else
        records = reconstruction_eval(load_model(o.model), ds, basis);

    const fs::path rec = o.out_prefix + "records.csv", box = o.out_prefix + "boxstats.csv",
                   edc = o.out_prefix + "edc.csv";
    ensure_parent(rec);
    write_records_csv(records, rec);
    write_boxstats_csv(per_identity_boxstats(records), box);
    write_edc_csv(edc_curve(records, default_edc_thresholds(records, o.edc_points)), edc);

    json c = {{"split", o.split}, {"oracle", o.oracle}, {"edc_points", o.edc_points}, {"align", "known-correspondence"}};
    json in = {{"data", o.data}, {"basis", o.basis}};
    if (!o.oracle)
        in["model"] = o.model;
    write_manifest(o.out_prefix + "manifest.json", "eval-recon", 0, c, in,
                   {{"records", rec.string()}, {"boxstats", box.string()}, {"edc", edc.string()}});

    double sum = 0;
    for (const auto& r : records)
        sum += r.nme_percent;
    std::printf("eval-recon: %zu samples, mean NME %.4f%%\n", records.size(), sum / static_cast<double>(records.size()));
    return 0;
}

// ---- eval-verify ----------------------------------------------------------------

struct VerifyOptions
{
    std::string model, data, out_prefix;
    int pairs = 6000;
    int genuine = 3000;
    int folds = 10;
    std::uint64_t seed = 1;
    std::string metric = "euclidean";
    std::string split = "validation";
};

void add_verify(CLI::App& app, VerifyOptions& o)
{
    auto* c = app.add_subcommand("eval-verify", "k-fold face verification on the identity embeddings");
    c->add_option("--model", o.model, "Model file")->required()->check(CLI::ExistingFile);
    c->add_option("--data", o.data, "Dataset file")->required()->check(CLI::ExistingFile);
    c->add_option("--out-prefix", o.out_prefix, "Prefix for roc.csv, folds.csv, manifest.json")->required();
    c->add_option("--pairs", o.pairs, std::string("Pairs drawn") + kPublished)
        ->check(CLI::Range(1, INT_MAX))
        ->capture_default_str();
    c->add_option("--genuine", o.genuine, std::string("Genuine pairs among them") + kPublished)
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    c->add_option("--folds", o.folds, std::string("Cross-validation folds") + kPublished)
        ->check(CLI::Range(2, INT_MAX))
        ->capture_default_str();
    c->add_option("--seed", o.seed, std::string("Pair sampling seed") + kLocal)->capture_default_str();
    c->add_option("--metric", o.metric, std::string("Embedding distance") + kLocal)
        ->check(CLI::IsMember({"euclidean", "normalized"}))
        ->capture_default_str();
    c->add_option("--split", o.split, std::string("Samples to draw pairs from") + kLocal)
        ->check(CLI::IsMember({"all", "train", "validation"}))
        ->capture_default_str();
}

int run_verify(const VerifyOptions& o)
{
    const Dataset ds = select_split(read_dataset(o.data), o.split);
    VerificationConfig vc;
    vc.n_pairs = o.pairs;
    vc.n_genuine = o.genuine;
    vc.folds = o.folds;
    vc.seed = o.seed;
    vc.metric = o.metric == "normalized" ? EmbeddingMetric::normalized_euclidean : EmbeddingMetric::euclidean;
    const RocResult r = verification_eval(load_model(o.model), ds, vc);

    const fs::path roc = o.out_prefix + "roc.csv", folds = o.out_prefix + "folds.csv";
    ensure_parent(roc);
    write_roc_csv(r.roc_points, roc);
    write_folds_csv(r, folds);
    json c = {{"pairs", o.pairs}, {"genuine", o.genuine}, {"folds", o.folds}, {"metric", o.metric}, {"split", o.split}};
    json results = {{"mean_accuracy", r.mean_accuracy}, {"auc", r.auc}};
    json outs = {{"roc", roc.string()}, {"folds", folds.string()}, {"results", results}};
    write_manifest(o.out_prefix + "manifest.json", "eval-verify", o.seed, c, {{"model", o.model}, {"data", o.data}},
                   outs);
    std::printf("eval-verify: %d pairs, %d folds, mean accuracy %.4f, AUC %.4f\n", o.pairs, o.folds, r.mean_accuracy,
                r.auc);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"siamese3dmm: Siamese 3DMM parameter regression at desk scale", "s3dmm"};
    app.set_version_flag("--version", S3DMM_VERSION);
    app.require_subcommand(1);

    SynthOptions synth;
    TrainOptions train_opts;
    ReconOptions recon;
    VerifyOptions verify;
    add_synth(app, synth);
    add_train(app, train_opts);
    add_recon(app, recon);
    add_verify(app, verify);

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (app.got_subcommand("synth"))
            return run_synth(synth);
        if (app.got_subcommand("train"))
            return run_train(train_opts);
        if (app.got_subcommand("eval-recon"))
            return run_recon(recon);
        if (app.got_subcommand("eval-verify"))
            return run_verify(verify);
    }
    catch (const TrainingDiverged& e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    catch (const std::exception& e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
