// scd — change-detection pipeline front door.
//
// Subcommands: synth, glimpse, train, eval, infer.
// Exit codes: 0 success, 1 usage error, 2 data/validation error,
// 3 numerical abort (non-finite loss or activations).

#include <CLI11.hpp>

#include <scd/checkpoint.hpp>
#include <scd/config.hpp>
#include <scd/data.hpp>
#include <scd/engine.hpp>
#include <scd/glimpse.hpp>
#include <scd/loss.hpp>
#include <scd/metrics.hpp>
#include <scd/model.hpp>
#include <scd/png_io.hpp>
#include <scd/tensor_io.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Write through a temp file and rename so failures never leave partial output.
template <typename Fn>
void atomic_file(const std::string& path, Fn&& write_fn) {
    const std::string tmp = path + ".tmp";
    write_fn(tmp);
    fs::rename(tmp, path);
}

void atomic_copy(const fs::path& from, const fs::path& to) {
    atomic_file(to.string(), [&](const std::string& tmp) {
        fs::copy_file(from, tmp, fs::copy_options::overwrite_existing);
    });
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return buf;
}

std::string real_str(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

// ---------------------------------------------------------------- synth ----

struct SynthArgs {
    std::string out;
    int count = 16;
    int height = 64, width = 64;
    std::uint64_t seed = 0;
    double change_fraction = 0.1;
    int test_count = 0;
};

int run_synth(const SynthArgs& a) {
    if (a.test_count < 0 || a.test_count >= a.count)
        throw UsageError("--test-count must lie in [0, count)");
    auto samples = scd::synth_generate<float>(a.seed, a.count, a.height, a.width, a.change_fraction);
    fs::create_directories(a.out);
    std::vector<std::string> ids;
    for (int k = 0; k < a.count; ++k) {
        char name[16];
        std::snprintf(name, sizeof name, "p%05d", k);
        ids.emplace_back(name);
        const fs::path dir = fs::path(a.out) / name;
        fs::create_directories(dir);
        const auto& s = samples[std::size_t(k)];
        atomic_file((dir / "t1.png").string(), [&](const std::string& p) { scd::write_png(p, *s.t1); });
        atomic_file((dir / "t2.png").string(), [&](const std::string& p) { scd::write_png(p, *s.t2); });
        std::vector<std::uint8_t> label(s.label->numel());
        for (std::size_t i = 0; i < label.size(); ++i) label[i] = s.label->data[i] > 0.5f ? 1 : 0;
        atomic_file((dir / "label.png").string(),
                    [&](const std::string& p) { scd::write_png_mask(p, label, a.height, a.width); });
    }
    if (a.test_count > 0) {
        auto manifest = [&](const std::string& file, int from, int to) {
            atomic_file((fs::path(a.out) / file).string(), [&](const std::string& p) {
                std::ofstream out(p);
                for (int k = from; k < to; ++k) out << ids[std::size_t(k)] << "\n";
                if (!out) throw std::runtime_error("synth: write failed: " + p);
            });
        };
        manifest("train.txt", 0, a.count - a.test_count);
        manifest("test.txt", a.count - a.test_count, a.count);
    }
    std::cout << "synth: wrote " << a.count << " pairs (" << a.count - a.test_count << " train, " << a.test_count
              << " test) to " << a.out << "\n";
    return 0;
}

// -------------------------------------------------------------- glimpse ----

struct GlimpseArgs {
    std::string in, out;
    double u = 0.1, s = 0.5, d = 2.0;
    int rows = 0, cols = 0;  // 0 = keep input size
};

int run_glimpse(const GlimpseArgs& a) {
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(a.in))
        if (entry.is_directory()) ids.push_back(entry.path().filename().string());
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw std::runtime_error("glimpse: no sample directories under " + a.in);

    fs::create_directories(a.out);
    for (const auto& id : ids) {
        const fs::path src = fs::path(a.in) / id;
        const fs::path dst = fs::path(a.out) / id;
        fs::create_directories(dst);
        for (const char* stem : {"t1", "t2"}) {
            auto img = scd::detail::load_plane<double>(src, stem, id);
            scd::GlimpseParams p;
            p.u = a.u;
            p.s = a.s;
            p.d = a.d;
            p.rows = a.rows > 0 ? a.rows : img->shape[1];
            p.cols = a.cols > 0 ? a.cols : img->shape[2];
            auto glimpsed = scd::apply_glimpse(img, p);
            if (fs::exists(src / (std::string(stem) + ".png")))
                atomic_file((dst / (std::string(stem) + ".png")).string(),
                            [&](const std::string& path) { scd::write_png(path, *glimpsed); });
            else
                atomic_file((dst / (std::string(stem) + ".scdt")).string(),
                            [&](const std::string& path) { scd::write_tensor(path, *glimpsed); });
        }
        // Labels pass through untouched.
        if (fs::exists(src / "label.png"))
            atomic_copy(src / "label.png", dst / "label.png");
        else if (fs::exists(src / "label.scdt"))
            atomic_copy(src / "label.scdt", dst / "label.scdt");
        else
            throw std::runtime_error("glimpse: sample '" + id + "' is missing label.png (or .scdt)");
    }
    for (const char* manifest : {"train.txt", "test.txt"})
        if (fs::exists(fs::path(a.in) / manifest)) atomic_copy(fs::path(a.in) / manifest, fs::path(a.out) / manifest);

    atomic_file((fs::path(a.out) / "glimpse.txt").string(), [&](const std::string& p) {
        std::ofstream out(p);
        out << "u=" << real_str(a.u) << "\ns=" << real_str(a.s) << "\nd=" << real_str(a.d) << "\n";
        if (!out) throw std::runtime_error("glimpse: write failed: " + p);
    });
    std::cout << "glimpse: processed " << ids.size() << " pairs (u=" << a.u << " s=" << a.s << " d=" << a.d
              << ") into " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------- train ----

struct TrainArgs {
    std::string data, variant, gated, config, out, log;
    std::vector<std::string> sets;
    // Dedicated overrides; -1 or NaN sentinel = not passed.
    long long steps = -1, batch = -1, seed = -1, eval_every = -1;
    double lr = -1.0, beta = -1.0;
};

scd::ModelConfig model_config_from(const scd::RunConfig& cfg) {
    scd::ModelConfig m;
    m.fusion = scd::fusion_from_name(cfg.get_string("model.fusion", "conc"));
    m.gated = cfg.get_bool("model.gated", false);
    m.encoder_filters = cfg.get_int_list("model.encoder_filters", m.encoder_filters);
    m.decoder_filters = cfg.get_int_list("model.decoder_filters", m.decoder_filters);
    m.kernel = int(cfg.get_int("model.kernel", m.kernel));
    m.input_channels = int(cfg.get_int("model.input_channels", m.input_channels));
    m.input_h = int(cfg.get_int("model.input_h", m.input_h));
    m.input_w = int(cfg.get_int("model.input_w", m.input_w));
    return m;
}

scd::TrainConfig train_config_from(const scd::RunConfig& cfg) {
    scd::TrainConfig t;
    t.steps = int(cfg.get_int("train.steps", t.steps));
    t.batch_size = int(cfg.get_int("train.batch_size", t.batch_size));
    t.learning_rate = cfg.get_real("train.learning_rate", t.learning_rate);
    const std::string opt = cfg.get_string("train.optimizer", "adam");
    if (opt == "adam")
        t.optimizer = scd::Optimizer::Adam;
    else if (opt == "sgd")
        t.optimizer = scd::Optimizer::Sgd;
    else
        throw std::invalid_argument("config: train.optimizer must be adam or sgd, got '" + opt + "'");
    t.adam_beta1 = cfg.get_real("train.adam_beta1", t.adam_beta1);
    t.adam_beta2 = cfg.get_real("train.adam_beta2", t.adam_beta2);
    t.adam_epsilon = cfg.get_real("train.adam_epsilon", t.adam_epsilon);
    t.seed = std::uint64_t(cfg.get_int("train.seed", 0));
    t.eval_every = int(cfg.get_int("train.eval_every", t.eval_every));
    t.loss_beta = cfg.get_real("train.beta", t.loss_beta);
    t.loss_epsilon = cfg.get_real("train.epsilon", t.loss_epsilon);
    t.deterministic = cfg.get_bool("train.deterministic", t.deterministic);
    return t;
}

void write_train_log(const std::string& path, const std::vector<scd::TrainLogEntry>& log) {
    atomic_file(path, [&](const std::string& tmp) {
        std::ofstream out(tmp);
        out << "step,loss,recall,f1,precision,accuracy\n";
        for (const auto& e : log) {
            out << e.step << ',' << real_str(e.loss);
            if (e.has_eval)
                out << ',' << real_str(e.eval.recall) << ',' << real_str(e.eval.f1) << ','
                    << real_str(e.eval.precision) << ',' << real_str(e.eval.accuracy);
            else
                out << ",,,,";
            out << "\n";
        }
        if (!out) throw std::runtime_error("train: log write failed: " + tmp);
    });
}

template <typename T>
int run_train_typed(const TrainArgs& a, const scd::RunConfig& cfg) {
    auto data = scd::load_split<T>(a.data);
    if (data.train.empty()) throw std::runtime_error("train: no training samples under " + a.data);

    scd::ModelConfig mc = model_config_from(cfg);
    // Geometry falls back to the data when the config does not pin it.
    const auto& probe = data.train.front();
    if (!cfg.has("model.input_channels")) mc.input_channels = probe.t1->shape[0];
    if (!cfg.has("model.input_h")) mc.input_h = probe.t1->shape[1];
    if (!cfg.has("model.input_w")) mc.input_w = probe.t1->shape[2];
    scd::validate(mc);

    scd::TrainConfig tc = train_config_from(cfg);
    auto model = scd::build<T>(mc, tc.seed);
    std::cout << "train: " << scd::variant_name(mc) << ", " << scd::count_params(mc) << " parameters, "
              << data.train.size() << " train / " << data.test.size() << " test samples, " << tc.steps
              << " steps\n";
    auto log = scd::train(model, data, tc);
    atomic_file(a.out, [&](const std::string& tmp) { scd::save_checkpoint(model, tmp); });
    const std::string log_path = a.log.empty() ? a.out + ".log.csv" : a.log;
    write_train_log(log_path, log);
    std::cout << "train: final loss " << (log.empty() ? 0.0 : log.back().loss) << "; wrote " << a.out << " and "
              << log_path << "\n";
    return 0;
}

int run_train(const TrainArgs& a) {
    scd::RunConfig cfg;
    if (!a.config.empty()) cfg = scd::parse_config_file(a.config);
    for (const auto& kv : a.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    // Dedicated flags beat both the file and --set.
    if (!a.variant.empty()) cfg.set("model.fusion", a.variant);
    if (!a.gated.empty()) cfg.set("model.gated", a.gated);
    if (a.steps >= 0) cfg.set("train.steps", std::to_string(a.steps));
    if (a.batch >= 0) cfg.set("train.batch_size", std::to_string(a.batch));
    if (a.seed >= 0) cfg.set("train.seed", std::to_string(a.seed));
    if (a.eval_every >= 0) cfg.set("train.eval_every", std::to_string(a.eval_every));
    if (a.lr >= 0) cfg.set("train.learning_rate", real_str(a.lr));
    if (a.beta >= 0) cfg.set("train.beta", real_str(a.beta));
    if (!cfg.has("model.fusion")) throw UsageError("pick a variant: --variant conc|diff (or model.fusion in the config)");

    const std::string precision = cfg.get_string("train.precision", "float");
    if (precision == "float") return run_train_typed<float>(a, cfg);
    if (precision == "double") return run_train_typed<double>(a, cfg);
    throw std::invalid_argument("config: train.precision must be float or double, got '" + precision + "'");
}

// ----------------------------------------------------------------- eval ----

struct EvalArgs {
    std::string ckpt, data, split = "auto", csv, per_tile;
    double threshold = 0.5;
    bool oracle = false;
};

std::map<std::string, std::string> read_sidecar(const fs::path& path) {
    std::map<std::string, std::string> kv;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

int run_eval(const EvalArgs& a) {
    if (a.ckpt.empty() && !a.oracle) throw UsageError("--ckpt is required (unless --oracle)");
    auto split = scd::load_split<float>(a.data);
    std::vector<scd::SamplePair<float>> samples;
    std::string which = a.split;
    if (which == "auto") which = split.test.empty() ? "train" : "test";
    if (which == "train")
        samples = std::move(split.train);
    else if (which == "test")
        samples = std::move(split.test);
    else if (which == "all") {
        samples = std::move(split.train);
        samples.insert(samples.end(), split.test.begin(), split.test.end());
    } else
        throw UsageError("--split must be train, test, or all");
    if (samples.empty()) throw std::runtime_error("eval: split '" + which + "' has no samples in " + a.data);

    std::string network = "oracle";
    std::vector<std::pair<std::string, scd::ConfusionCounts>> per_tile;
    scd::ConfusionCounts global;
    if (a.oracle) {
        for (const auto& s : samples) {
            auto c = scd::confusion(s.label, s.label, a.threshold);
            global += c;
            per_tile.emplace_back(s.id, c);
        }
    } else {
        auto model = scd::load_checkpoint<float>(a.ckpt);
        network = scd::variant_name(model.config);
        global = scd::evaluate(model, samples, a.threshold, &per_tile);
    }
    auto sc = scd::scores(global);

    auto sidecar = read_sidecar(fs::path(a.data) / "glimpse.txt");
    auto param = [&](const char* key) {
        auto it = sidecar.find(key);
        return it == sidecar.end() ? std::string("-") : it->second;
    };
    const std::string u = param("u"), s = param("s"), d = param("d");
    const std::string recall = pct(sc.recall), f1 = pct(sc.f1), precision = pct(sc.precision),
                      accuracy = pct(sc.accuracy);

    std::printf("%-20s %6s %6s %6s %8s %8s %10s %9s\n", "network", "u", "s", "d", "Recall", "F1", "Precision",
                "Accuracy");
    std::printf("%-20s %6s %6s %6s %8s %8s %10s %9s\n", network.c_str(), u.c_str(), s.c_str(), d.c_str(),
                recall.c_str(), f1.c_str(), precision.c_str(), accuracy.c_str());
    std::printf("counts: tp=%llu fp=%llu tn=%llu fn=%llu over %zu samples (%s split)\n",
                (unsigned long long)global.tp, (unsigned long long)global.fp, (unsigned long long)global.tn,
                (unsigned long long)global.fn, samples.size(), which.c_str());
    if (!sc.positives_defined) std::printf("note: no positives in labels or predictions; scores default to 0\n");

    if (!a.csv.empty())
        atomic_file(a.csv, [&](const std::string& tmp) {
            std::ofstream out(tmp);
            out << "network,u,s,d,Recall,F1,Precision,Accuracy\n";
            out << network << ',' << u << ',' << s << ',' << d << ',' << recall << ',' << f1 << ',' << precision
                << ',' << accuracy << "\n";
            if (!out) throw std::runtime_error("eval: CSV write failed: " + tmp);
        });
    if (!a.per_tile.empty())
        atomic_file(a.per_tile, [&](const std::string& tmp) {
            std::ofstream out(tmp);
            out << "id,tp,fp,tn,fn,Recall,F1,Precision,Accuracy\n";
            for (const auto& [id, c] : per_tile) {
                auto ts = scd::scores(c);
                out << id << ',' << c.tp << ',' << c.fp << ',' << c.tn << ',' << c.fn << ',' << pct(ts.recall) << ','
                    << pct(ts.f1) << ',' << pct(ts.precision) << ',' << pct(ts.accuracy) << "\n";
            }
            if (!out) throw std::runtime_error("eval: per-tile CSV write failed: " + tmp);
        });
    return 0;
}

// ---------------------------------------------------------------- infer ----

struct InferArgs {
    std::string ckpt, t1, t2, out;
    double threshold = 0.5;
};

scd::TensorPtr<float> read_image(const std::string& path) {
    if (fs::path(path).extension() == ".scdt") return scd::read_tensor<float>(path);
    return scd::read_png<float>(path);
}

int run_infer(const InferArgs& a) {
    auto model = scd::load_checkpoint<float>(a.ckpt);
    auto t1 = read_image(a.t1);
    auto t2 = read_image(a.t2);
    auto res = scd::infer(model, t1, t2, a.threshold);
    const int h = res.prob->shape[1], w = res.prob->shape[2];
    const std::string prob_path = a.out + "_prob.scdt";
    const std::string mask_path = a.out + "_mask.png";
    atomic_file(prob_path, [&](const std::string& p) { scd::write_tensor(p, *res.prob); });
    atomic_file(mask_path, [&](const std::string& p) { scd::write_png_mask(p, res.mask, h, w); });
    std::size_t changed = 0;
    for (auto m : res.mask) changed += m;
    std::printf("infer: %dx%d map, %.2f%% changed; wrote %s and %s\n", h, w,
                100.0 * double(changed) / double(res.mask.size()), prob_path.c_str(), mask_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Siamese change-detection pipeline: preprocess, train, evaluate, infer"};
    app.require_subcommand(1);

    SynthArgs sy;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic change-pair dataset with exact labels");
    synth->add_option("--out", sy.out, "Output dataset directory")->required();
    synth->add_option("--count", sy.count, "Number of pairs")->default_val(16)->check(CLI::Range(1, 99999));
    synth->add_option("--height", sy.height, "Image height")->default_val(64)->check(CLI::Range(8, 4096));
    synth->add_option("--width", sy.width, "Image width")->default_val(64)->check(CLI::Range(8, 4096));
    synth->add_option("--seed", sy.seed, "Generator seed")->default_val(0);
    synth->add_option("--change-fraction", sy.change_fraction, "Target changed-pixel fraction, in (0, 0.5)")
        ->default_val(0.1);
    synth->add_option("--test-count", sy.test_count, "Hold out the last K pairs via train/test manifests")
        ->default_val(0);

    GlimpseArgs gl;
    auto* glimpse = app.add_subcommand("glimpse", "Apply the Gaussian-attention glimpse to a dataset");
    glimpse->add_option("--in", gl.in, "Input dataset directory")->required();
    glimpse->add_option("--out", gl.out, "Output dataset directory (mirrored layout + glimpse.txt sidecar)")
        ->required();
    glimpse->add_option("--u", gl.u, "Grid center offset")->default_val(0.1);
    glimpse->add_option("--s", gl.s, "Gaussian standard deviation")->default_val(0.5);
    glimpse->add_option("--d", gl.d, "Grid stride between Gaussian centers")->default_val(2.0);
    glimpse->add_option("--rows", gl.rows, "Output rows (0 = keep input height)")->default_val(0);
    glimpse->add_option("--cols", gl.cols, "Output cols (0 = keep input width)")->default_val(0);

    TrainArgs tr;
    auto* train = app.add_subcommand("train", "Train a Siamese change-detection network");
    train->add_option("--data", tr.data, "Dataset directory (train.txt/test.txt manifests honored)")->required();
    train->add_option("--variant", tr.variant, "Skip fusion: conc or diff")->check(CLI::IsMember({"conc", "diff"}));
    train->add_option("--gated", tr.gated, "Attention gates on skips: true or false")
        ->check(CLI::IsMember({"true", "false", "1", "0"}));
    train->add_option("--config", tr.config, "key=value config file");
    train->add_option("--out", tr.out, "Checkpoint output path")->required();
    train->add_option("--log", tr.log, "Training log CSV path (default: <out>.log.csv)");
    train->add_option("--set", tr.sets, "Override any config key, e.g. --set train.steps=300");
    train->add_option("--steps", tr.steps, "Optimizer steps");
    train->add_option("--batch", tr.batch, "Batch size");
    train->add_option("--seed", tr.seed, "Training seed");
    train->add_option("--eval-every", tr.eval_every, "Eval cadence in steps (0 = off)");
    train->add_option("--lr", tr.lr, "Learning rate");
    train->add_option("--beta", tr.beta, "Loss class-balance weight (unset: derived from the training split)");

    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint; prints a metrics table and optional CSVs");
    eval->add_option("--ckpt", ev.ckpt, "Checkpoint path");
    eval->add_option("--data", ev.data, "Dataset directory")->required();
    eval->add_option("--threshold", ev.threshold, "Binarization threshold, in (0, 1)")->default_val(0.5);
    eval->add_option("--split", ev.split, "Which split: auto, train, test, all")->default_val("auto");
    eval->add_option("--csv", ev.csv, "Write the metrics row as CSV here");
    eval->add_option("--per-tile", ev.per_tile, "Write per-sample counts and scores as CSV here");
    eval->add_flag("--oracle", ev.oracle, "Debug: feed labels as predictions (expect 100s)");

    InferArgs in;
    auto* infer = app.add_subcommand("infer", "Run a checkpoint on one image pair");
    infer->add_option("--ckpt", in.ckpt, "Checkpoint path")->required();
    infer->add_option("--t1", in.t1, "Earlier image (PNG or SCDT1)")->required();
    infer->add_option("--t2", in.t2, "Later image (PNG or SCDT1)")->required();
    infer->add_option("--out", in.out, "Output prefix: writes <out>_prob.scdt and <out>_mask.png")->required();
    infer->add_option("--threshold", in.threshold, "Binarization threshold, in (0, 1)")->default_val(0.5);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) return run_synth(sy);
        if (glimpse->parsed()) return run_glimpse(gl);
        if (train->parsed()) return run_train(tr);
        if (eval->parsed()) return run_eval(ev);
        if (infer->parsed()) return run_infer(in);
        return 1;
    } catch (const scd::TrainDivergence& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
