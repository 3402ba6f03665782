// Command-line front end: dataset generation, CNN training, evaluation,
// ROC export, and the covariance-baseline detector.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfad/pipeline.hpp"

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

// Exit codes: 0 ok, 1 usage/config, 2 data/format, 3 numerical.
constexpr int kExitConfig = 1;
constexpr int kExitFormat = 2;
constexpr int kExitNumeric = 3;

void write_manifest(const std::string& command, const cfad::SystemConfig* cfg,
                    std::uint64_t seed, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, double wall_s) {
    if (outputs.empty()) return;
    json m;
    m["command"] = command;
    if (cfg) m["config"] = cfg->canonical_text();
    m["seed"] = seed;
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    json digests = json::object();
    for (const auto& out : outputs)
        digests[out] = cfad::file_digest(out);
    m["digests"] = digests;
    m["wall_clock_s"] = wall_s;
    const std::string path = outputs.front() + ".manifest.json";
    std::ofstream os(path, std::ios::binary);
    os << m.dump(2) << '\n';
}

cfad::SystemConfig resolve_config(const std::string& config_path,
                                  const std::vector<std::string>& overrides) {
    cfad::SystemConfig cfg;
    if (!config_path.empty()) cfg = cfad::load_config(config_path);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw cfad::ConfigError("--set expects key=value, got '" + kv + "'");
        cfad::apply_config_entry(cfg, cfad::detail::trim(kv.substr(0, eq)),
                                 cfad::detail::trim(kv.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

int run(int argc, char** argv) {
    CLI::App app{"cell-free massive MIMO grant-free activity detection toolkit"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "synthesize a dataset file");
    std::string gen_config, gen_out = "dataset.cfad";
    std::vector<std::string> gen_set;
    std::uint64_t gen_count = 1000;
    std::optional<std::uint64_t> gen_seed;
    gen->add_option("--config", gen_config, "key = value config file");
    gen->add_option("--set", gen_set, "override a config key (key=value)");
    gen->add_option("--count", gen_count, "number of samples");
    gen->add_option("--seed", gen_seed, "override rng_seed");
    gen->add_option("--out", gen_out, "output dataset path");

    // train
    auto* train = app.add_subcommand("train", "train the CNN on a dataset");
    std::string train_data, train_val, train_model = "model.cfnt", train_loss;
    int train_epochs = -1, train_batch = -1;
    double train_lr = -1.0;
    std::optional<std::uint64_t> train_seed;
    train->add_option("--data", train_data, "training dataset")->required();
    train->add_option("--val", train_val, "validation dataset");
    train->add_option("--epochs", train_epochs, "epochs (default from dataset config)");
    train->add_option("--batch", train_batch, "mini-batch size");
    train->add_option("--lr", train_lr, "learning rate");
    train->add_option("--seed", train_seed, "training seed (default dataset rng_seed)");
    train->add_option("--out-model", train_model, "checkpoint path");
    train->add_option("--out-loss", train_loss, "loss trace CSV (default <model>.loss.csv)");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a model at a threshold");
    std::string eval_model, eval_data, eval_out;
    std::optional<double> eval_target_fa, eval_threshold;
    eval->add_option("--model", eval_model, "checkpoint")->required();
    eval->add_option("--data", eval_data, "dataset")->required();
    eval->add_option("--target-fa", eval_target_fa, "calibrate threshold for this FA");
    eval->add_option("--threshold", eval_threshold, "fixed decision threshold");
    eval->add_option("--out", eval_out, "also write the report to this file");

    // roc
    auto* roc = app.add_subcommand("roc", "sweep a full ROC curve");
    std::string roc_model, roc_data, roc_csv = "roc.csv";
    bool roc_baseline = false;
    int roc_sweeps = 15;
    roc->add_option("--model", roc_model, "checkpoint (CNN scores)");
    roc->add_flag("--baseline", roc_baseline, "use the covariance-union baseline");
    roc->add_option("--data", roc_data, "dataset")->required();
    roc->add_option("--sweeps", roc_sweeps, "coordinate-descent sweeps (baseline)");
    roc->add_option("--out-csv", roc_csv, "output CSV path");

    // baseline
    auto* base = app.add_subcommand("baseline", "covariance-baseline scores per sample/user");
    std::string base_data, base_out = "baseline_scores.csv";
    int base_sweeps = 15;
    base->add_option("--data", base_data, "dataset")->required();
    base->add_option("--sweeps", base_sweeps, "coordinate-descent sweeps");
    base->add_option("--out-scores", base_out, "output CSV path");

    CLI11_PARSE(app, argc, argv);
    const auto t0 = Clock::now();
    const auto wall = [&] {
        return std::chrono::duration<double>(Clock::now() - t0).count();
    };

    if (gen->parsed()) {
        cfad::SystemConfig cfg = resolve_config(gen_config, gen_set);
        if (gen_seed) cfg.rng_seed = *gen_seed;
        cfad::generate_dataset(cfg, gen_count, gen_out);
        write_manifest("generate", &cfg, cfg.rng_seed, {}, {gen_out}, wall());
        std::cout << "wrote " << gen_count << " samples to " << gen_out << '\n';
        return 0;
    }

    if (train->parsed()) {
        cfad::DatasetReader reader(train_data);
        const auto& h = reader.header();
        cfad::nn::TrainData data = cfad::load_train_data(reader);
        std::optional<cfad::nn::TrainData> val;
        if (!train_val.empty()) {
            cfad::DatasetReader vreader(train_val);
            cfad::check_shape_match(h, vreader.header());
            val = cfad::load_train_data(vreader);
        }
        cfad::nn::TrainConfig tcfg;
        tcfg.batch_size = train_batch > 0 ? train_batch : h.config.batch_size;
        tcfg.epochs = train_epochs >= 0 ? train_epochs : h.config.num_epochs;
        tcfg.learning_rate = train_lr > 0.0 ? train_lr : h.config.learning_rate;
        const std::uint64_t seed = train_seed ? *train_seed : h.config.rng_seed;

        cfad::RandomStream init_rng = cfad::RandomStream::substream(seed, 0x1a17);
        cfad::nn::Network net(
            cfad::nn::NetworkShape::standard(h.feature_depth(),
                                             static_cast<int>(h.num_antennas),
                                             static_cast<int>(h.num_users)),
            init_rng);
        cfad::RandomStream train_rng = cfad::RandomStream::substream(seed, 0x7a14);
        const auto trace =
            cfad::nn::train(net, data, val ? &*val : nullptr, tcfg, train_rng, true);
        cfad::save_checkpoint(net, train_model);
        const std::string loss_path =
            train_loss.empty() ? train_model + ".loss.csv" : train_loss;
        cfad::write_loss_csv(loss_path, trace);
        write_manifest("train", &h.config, seed, {train_data}, {train_model, loss_path},
                       wall());
        std::cout << "checkpoint " << train_model << ", loss trace " << loss_path << '\n';
        return 0;
    }

    if (eval->parsed()) {
        if (!eval_target_fa && !eval_threshold)
            throw cfad::ConfigError("eval: pass --target-fa or --threshold");
        cfad::nn::Network net = cfad::load_checkpoint(eval_model);
        cfad::DatasetReader reader(eval_data);
        cfad::check_model_data_compat(net, reader.header());
        cfad::nn::TrainData data = cfad::load_train_data(reader);
        const cfad::PooledScores pooled = cfad::cnn_scores(net, data);

        std::string report;
        if (eval_threshold) {
            const auto counts = cfad::confusion(pooled.scores, pooled.truth, *eval_threshold);
            report = cfad::metrics_report(counts, *eval_threshold);
        } else {
            // calibrate on the first half, measure on the second
            const std::size_t half = pooled.scores.size() / 2;
            std::vector<double> cal_s(pooled.scores.begin(), pooled.scores.begin() + half);
            std::vector<std::uint8_t> cal_t(pooled.truth.begin(), pooled.truth.begin() + half);
            std::vector<double> test_s(pooled.scores.begin() + half, pooled.scores.end());
            std::vector<std::uint8_t> test_t(pooled.truth.begin() + half, pooled.truth.end());
            const auto curve = cfad::roc_sweep(cal_s, cal_t);
            const auto cal = cfad::threshold_for_fa(curve, *eval_target_fa);
            const auto counts = cfad::confusion(test_s, test_t, cal.threshold);
            std::ostringstream os;
            os.precision(10);
            os << "target_fa " << *eval_target_fa << '\n'
               << "calibration_fa " << cal.achieved_fa << '\n'
               << (cal.saturated ? "warning target below achievable FA\n" : "")
               << cfad::metrics_report(counts, cal.threshold);
            report = os.str();
        }
        std::cout << report;
        if (!eval_out.empty()) {
            std::ofstream os(eval_out, std::ios::binary);
            os << report;
            write_manifest("eval", &reader.header().config, reader.header().config.rng_seed,
                           {eval_model, eval_data}, {eval_out}, wall());
        }
        return 0;
    }

    if (roc->parsed()) {
        if (!roc_baseline && roc_model.empty())
            throw cfad::ConfigError("roc: pass --model or --baseline");
        if (roc_baseline && !roc_model.empty())
            throw cfad::ConfigError("roc: --model and --baseline are mutually exclusive");
        cfad::DatasetReader reader(roc_data);
        cfad::PooledScores pooled;
        if (roc_baseline) {
            pooled = cfad::baseline_scores(reader.header(), roc_sweeps).pooled;
        } else {
            cfad::nn::Network net = cfad::load_checkpoint(roc_model);
            cfad::check_model_data_compat(net, reader.header());
            cfad::nn::TrainData data = cfad::load_train_data(reader);
            pooled = cfad::cnn_scores(net, data);
        }
        const auto curve = cfad::roc_sweep(pooled.scores, pooled.truth);
        cfad::write_roc_csv(roc_csv, curve);
        write_manifest("roc", &reader.header().config, reader.header().config.rng_seed,
                       {roc_data}, {roc_csv}, wall());
        std::cout << "auc " << curve.auc << ", curve written to " << roc_csv << '\n';
        return 0;
    }

    if (base->parsed()) {
        cfad::DatasetReader reader(base_data);
        const auto res = cfad::baseline_scores(reader.header(), base_sweeps);
        std::ofstream os(base_out, std::ios::binary);
        if (!os) throw cfad::FormatError("cannot open '" + base_out + "' for writing");
        os << "sample,user,score,active\n";
        os.precision(12);
        for (std::size_t i = 0; i < res.per_sample_scores.size(); ++i)
            for (Eigen::Index k = 0; k < res.per_sample_scores[i].size(); ++k)
                os << i << ',' << k << ',' << res.per_sample_scores[i](k) << ','
                   << static_cast<int>(res.truths[i][static_cast<std::size_t>(k)]) << '\n';
        os.close();
        write_manifest("baseline", &reader.header().config,
                       reader.header().config.rng_seed, {base_data}, {base_out}, wall());
        std::cout << "scores written to " << base_out << '\n';
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const cfad::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const cfad::FormatError& e) {
        std::cerr << "format error: " << e.what() << '\n';
        return kExitFormat;
    } catch (const cfad::NumericError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::domain_error& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFormat;
    }
}
