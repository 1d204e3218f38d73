// Command-line front end: training, evaluation, data generation and the
// ablation sweep. Exit codes: 0 success, 1 usage/config error, 2 data
// error, 3 numerical abort.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "seq4/maze.hpp"
#include "seq4/ngram.hpp"
#include "seq4/trainer.hpp"

namespace fs = std::filesystem;
using namespace seq4;

namespace {

struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------
// Config file: flat "key = value" lines, '#' comments.

const std::vector<std::string> kConfigKeys = {
    "learning_rate", "grad_clip_norm", "epochs",  "alpha",    "lambda",
    "seed",          "latent_ratio",   "latent_max", "hidden", "embed",
    "attn",          "mode",           "patience", "max_len"};

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

train::TrainConfig parse_config(const std::string& path, bool* mode_explicit = nullptr) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open config file " + path);
    train::TrainConfig cfg;
    if (mode_explicit) *mode_explicit = false;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string s = trim(line.substr(0, line.find('#')));
        if (s.empty()) continue;
        std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw UsageError(path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(s.substr(0, eq));
        std::string val = trim(s.substr(eq + 1));
        try {
            if (key == "learning_rate") cfg.learning_rate = std::stod(val);
            else if (key == "grad_clip_norm") cfg.grad_clip_norm = std::stod(val);
            else if (key == "epochs") cfg.epochs = std::stoi(val);
            else if (key == "alpha") cfg.alpha = std::stod(val);
            else if (key == "lambda") cfg.unsup_batch_prob = std::stod(val);
            else if (key == "seed") cfg.seed = std::stoull(val);
            else if (key == "latent_ratio") cfg.latent_ratio = std::stod(val);
            else if (key == "latent_max") cfg.latent_max = std::stoul(val);
            else if (key == "hidden") cfg.hidden = std::stoul(val);
            else if (key == "embed") cfg.embed = std::stoul(val);
            else if (key == "attn") cfg.attn = std::stoul(val);
            else if (key == "patience") cfg.patience = std::stoi(val);
            else if (key == "max_len") cfg.max_len = std::stoul(val);
            else if (key == "mode") {
                if (val == "s2s") cfg.mode = train::ModelMode::s2s;
                else if (val == "seq4") cfg.mode = train::ModelMode::seq4;
                else throw UsageError(path + ":" + std::to_string(lineno) +
                                      ": mode must be s2s or seq4, got " + val);
                if (mode_explicit) *mode_explicit = true;
            } else {
                std::string known;
                for (const auto& k : kConfigKeys) known += (known.empty() ? "" : ", ") + k;
                throw UsageError(path + ":" + std::to_string(lineno) + ": unknown key '" + key +
                                 "' (valid keys: " + known + ")");
            }
        } catch (const std::invalid_argument&) {
            throw UsageError(path + ":" + std::to_string(lineno) + ": bad value for " + key);
        } catch (const std::out_of_range&) {
            throw UsageError(path + ":" + std::to_string(lineno) + ": bad value for " + key);
        }
    }
    try {
        cfg.validate();
    } catch (const ad::ContractError& e) {
        throw UsageError(std::string(e.what()) + " in " + path);
    }
    return cfg;
}

std::string mode_name(train::ModelMode m) { return m == train::ModelMode::s2s ? "s2s" : "seq4"; }

void dump_config(std::ostream& os, const train::TrainConfig& cfg) {
    os << std::setprecision(17);
    os << "learning_rate = " << cfg.learning_rate << '\n'
       << "grad_clip_norm = " << cfg.grad_clip_norm << '\n'
       << "epochs = " << cfg.epochs << '\n'
       << "alpha = " << cfg.alpha << '\n'
       << "lambda = " << cfg.unsup_batch_prob << '\n'
       << "seed = " << cfg.seed << '\n'
       << "latent_ratio = " << cfg.latent_ratio << '\n'
       << "latent_max = " << cfg.latent_max << '\n'
       << "hidden = " << cfg.hidden << '\n'
       << "embed = " << cfg.embed << '\n'
       << "attn = " << cfg.attn << '\n'
       << "mode = " << mode_name(cfg.mode) << '\n'
       << "patience = " << cfg.patience << '\n'
       << "max_len = " << cfg.max_len << '\n';
}

// ---------------------------------------------------------------------
// Manifest

std::uint64_t file_digest(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path);
    std::uint64_t h = 1469598103934665603ull;
    char c;
    while (is.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

struct Manifest {
    std::string command;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> entries;

    void add(const std::string& k, const std::string& v) { entries.emplace_back(k, v); }
    void add_input(const std::string& path) {
        std::ostringstream h;
        h << std::hex << std::setfill('0') << std::setw(16) << file_digest(path);
        add("input." + path, h.str());
    }

    // written atomically at run end
    void write(const fs::path& path, double duration_ms) const {
        fs::path tmp = path;
        tmp += ".tmp";
        {
            std::ofstream os(tmp);
            if (!os) throw DataError("cannot write manifest " + path.string());
            os << "command = " << command << '\n' << "seed = " << seed << '\n';
            for (const auto& [k, v] : entries) os << k << " = " << v << '\n';
            os << "duration_ms = " << std::llround(duration_ms) << '\n';
        }
        fs::rename(tmp, path);
    }
};

std::string hex64(std::uint64_t h) {
    std::ostringstream os;
    os << std::hex << std::setfill('0') << std::setw(16) << h;
    return os.str();
}

// ---------------------------------------------------------------------
// Checkpoint directory: params.txt, vocab_x.tsv, vocab_y.tsv, config.txt

struct Checkpoint {
    train::TrainConfig cfg;
    corpus::Vocab vocab_x, vocab_y;
    model::Seq4Params params;
};

model::Config model_config(const train::TrainConfig& cfg, std::size_t vx, std::size_t vy) {
    model::Config c;
    c.vocab_x = vx;
    c.vocab_y = vy;
    c.hidden = cfg.hidden;
    c.embed = cfg.embed;
    c.attn = cfg.attn;
    c.latent_ratio = cfg.latent_ratio;
    c.latent_max = cfg.latent_max;
    return c;
}

void save_checkpoint(const fs::path& dir, const train::TrainConfig& cfg,
                     const corpus::Vocab& vx, const corpus::Vocab& vy,
                     model::Seq4Params& params) {
    fs::create_directories(dir);
    vx.save((dir / "vocab_x.tsv").string());
    vy.save((dir / "vocab_y.tsv").string());
    auto plist = params.all();
    nn::save_params((dir / "params.txt").string(), plist);
    std::ofstream cf(dir / "config.txt");
    dump_config(cf, cfg);
    cf << "vocab_x_hash = " << hex64(vx.hash()) << '\n'
       << "vocab_y_hash = " << hex64(vy.hash()) << '\n';
}

Checkpoint load_checkpoint(const fs::path& dir) {
    if (!fs::exists(dir / "config.txt")) throw DataError("no checkpoint at " + dir.string());
    Checkpoint ck;
    std::string recorded_x, recorded_y;
    {
        std::ifstream is(dir / "config.txt");
        std::stringstream filtered;
        std::string line;
        while (std::getline(is, line)) {
            if (line.rfind("vocab_x_hash", 0) == 0)
                recorded_x = trim(line.substr(line.find('=') + 1));
            else if (line.rfind("vocab_y_hash", 0) == 0)
                recorded_y = trim(line.substr(line.find('=') + 1));
            else
                filtered << line << '\n';
        }
        fs::path tmp = dir / ".config.parse.tmp";
        std::ofstream os(tmp);
        os << filtered.str();
        os.close();
        ck.cfg = parse_config(tmp.string());
        fs::remove(tmp);
    }
    ck.vocab_x = corpus::Vocab::load((dir / "vocab_x.tsv").string());
    ck.vocab_y = corpus::Vocab::load((dir / "vocab_y.tsv").string());
    if (hex64(ck.vocab_x.hash()) != recorded_x || hex64(ck.vocab_y.hash()) != recorded_y)
        throw DataError("vocabulary hash mismatch: checkpoint records x=" + recorded_x +
                        " y=" + recorded_y + ", loaded vocabularies hash to x=" +
                        hex64(ck.vocab_x.hash()) + " y=" + hex64(ck.vocab_y.hash()));
    Rng init(Rng::substream(ck.cfg.seed, "model-init"));
    ck.params = model::Seq4Params::init(model_config(ck.cfg, ck.vocab_x.size(), ck.vocab_y.size()),
                                        init);
    auto plist = ck.params.all();
    nn::load_params((dir / "params.txt").string(), plist);
    return ck;
}

// ---------------------------------------------------------------------
// train

struct TrainOpts {
    std::string config, data, unpaired, validation, out;
};

int cmd_train(const TrainOpts& o) {
    auto t0 = std::chrono::steady_clock::now();
    bool mode_explicit = false;
    train::TrainConfig cfg = parse_config(o.config, &mode_explicit);
    // without an unpaired pool the run is the supervised baseline
    if (!mode_explicit) cfg.mode = o.unpaired.empty() ? train::ModelMode::s2s
                                                      : train::ModelMode::seq4;

    auto paired = corpus::load_parallel(o.data);
    std::vector<corpus::ParallelExample> unpaired;
    if (!o.unpaired.empty()) unpaired = corpus::load_unpaired(o.unpaired);
    std::vector<corpus::ParallelExample> validation;
    if (!o.validation.empty()) validation = corpus::load_parallel(o.validation);

    std::vector<std::vector<std::string>> xs, ys;
    for (const auto& ex : paired) {
        xs.push_back(ex.x_tokens);
        ys.push_back(ex.y_tokens);
    }
    for (const auto& ex : unpaired) ys.push_back(ex.y_tokens);
    corpus::Vocab vx = corpus::Vocab::build(xs);
    corpus::Vocab vy = corpus::Vocab::build(ys);

    Rng init(Rng::substream(cfg.seed, "model-init"));
    model::Seq4Params params = model::Seq4Params::init(model_config(cfg, vx.size(), vy.size()),
                                                       init);
    train::Dataset data;
    data.vocab_x = &vx;
    data.vocab_y = &vy;
    data.paired = std::move(paired);
    data.unpaired = std::move(unpaired);
    train::TrainResult result = train::train(params, data, cfg, validation);

    fs::path dir(o.out);
    save_checkpoint(dir, cfg, vx, vy, params);
    {
        std::ofstream log(dir / "loss.tsv");
        log << std::setprecision(17);
        for (const auto& rec : result.history)
            log << rec.step << '\t' << rec.kind << '\t' << rec.value << '\n';
    }

    Manifest m;
    m.command = "train";
    m.seed = cfg.seed;
    std::ostringstream snapshot;
    dump_config(snapshot, cfg);
    m.add("config_file", o.config);
    m.add_input(o.config);
    m.add_input(o.data);
    if (!o.unpaired.empty()) m.add_input(o.unpaired);
    if (!o.validation.empty()) m.add_input(o.validation);
    m.add("vocab_x_hash", hex64(vx.hash()));
    m.add("vocab_y_hash", hex64(vy.hash()));
    m.add("mode", mode_name(cfg.mode));
    m.add("epochs_run", std::to_string(result.epochs_run));
    m.add("output.checkpoint", (dir / "params.txt").string());
    m.add("output.loss_log", (dir / "loss.tsv").string());
    {
        std::istringstream snap(snapshot.str());
        std::string line;
        while (std::getline(snap, line)) {
            std::size_t eq = line.find('=');
            m.add("config." + trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
    m.write(dir / "manifest.txt", ms);
    std::cout << "trained " << result.epochs_run << " epochs, checkpoint at " << dir.string()
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------
// eval

struct EvalOpts {
    std::string checkpoint, test, task = "query", maze_file, paths_file;
};

int cmd_eval(const EvalOpts& o) {
    Checkpoint ck = load_checkpoint(o.checkpoint);
    auto test = corpus::load_parallel(o.test);
    if (test.empty()) throw DataError("empty test file " + o.test);

    train::Dataset data;
    data.vocab_x = &ck.vocab_x;
    data.vocab_y = &ck.vocab_y;

    if (o.task == "query") {
        double acc = train::eval_exact_match(ck.params, data, test, ck.cfg.max_len);
        std::cout << "accuracy " << std::fixed << std::setprecision(4) << acc << "\n";
        return 0;
    }
    if (o.task != "sail") throw UsageError("--task must be query or sail, got " + o.task);

    // sail: score by final state after executing the predicted actions
    if (o.maze_file.empty() || o.paths_file.empty())
        throw UsageError("sail evaluation needs --maze and --paths");
    std::ifstream mis(o.maze_file);
    if (!mis) throw DataError("cannot open maze file " + o.maze_file);
    maze::Maze world = maze::Maze::load(mis);
    std::ifstream pis(o.paths_file);
    if (!pis) throw DataError("cannot open path file " + o.paths_file);
    std::vector<maze::PathSample> gold;
    std::string line;
    while (std::getline(pis, line))
        if (!trim(line).empty()) gold.push_back(maze::parse_path(line));
    if (gold.size() != test.size())
        throw DataError("path file has " + std::to_string(gold.size()) + " records but test has " +
                        std::to_string(test.size()));

    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        std::vector<int> x = corpus::encode_with_eos(ck.vocab_x, test[i].x_tokens);
        auto pred = model::predict(ck.params, x, ck.cfg.max_len);
        bool ok = false;
        try {
            maze::ActionSeq actions;
            for (const std::string& t : ck.vocab_y.decode(pred.tokens))
                actions.push_back(maze::parse_action(t));
            maze::check_actions(actions);
            maze::AgentState end = maze::execute(world, gold[i].start, actions);
            ok = maze::eval_final_state(end, gold[i].end);
        } catch (const maze::BlockedMove&) {
        } catch (const corpus::ParseError&) {
        } catch (const ad::ContractError&) {
        }
        correct += ok;
    }
    std::cout << "accuracy " << std::fixed << std::setprecision(4)
              << double(correct) / double(test.size()) << "\n";
    return 0;
}

// ---------------------------------------------------------------------
// generate

struct GenerateOpts {
    std::string mode = "queries", source, exclude, out, maze_out;
    std::size_t count = 100;
    std::uint64_t seed = 1;
    std::size_t max_len = 128;
};

std::vector<std::vector<std::string>> load_token_lines(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open " + path);
    std::vector<std::vector<std::string>> out;
    std::string line;
    while (std::getline(is, line)) {
        auto toks = corpus::split_ws(line);
        if (!toks.empty()) out.push_back(std::move(toks));
    }
    return out;
}

int cmd_generate(const GenerateOpts& o) {
    auto t0 = std::chrono::steady_clock::now();
    std::ofstream os(o.out);
    if (!os) throw DataError("cannot open output " + o.out);
    Manifest m;
    m.command = "generate";
    m.seed = o.seed;
    m.add("mode", o.mode);
    m.add("count", std::to_string(o.count));

    if (o.mode == "queries") {
        if (o.source.empty()) throw UsageError("queries mode needs --source corpus");
        auto source = load_token_lines(o.source);
        m.add_input(o.source);
        auto model = ngram::TrigramModel::fit(source);
        std::set<std::vector<std::string>> exclude;
        if (!o.exclude.empty()) {
            for (auto& s : load_token_lines(o.exclude)) exclude.insert(std::move(s));
            m.add_input(o.exclude);
        }
        Rng rng(Rng::substream(o.seed, "generator"));
        std::size_t emitted = 0;
        for (; emitted < o.count; ++emitted) {
            try {
                auto q = ngram::sample(model, rng, exclude, o.max_len);
                for (std::size_t i = 0; i < q.size(); ++i) os << (i ? " " : "") << q[i];
                os << '\n';
            } catch (const ngram::ExhaustionError&) {
                std::cerr << "warning: sampler exhausted after " << emitted << " of " << o.count
                          << " samples\n";
                break;
            }
        }
        m.add("emitted", std::to_string(emitted));
    } else if (o.mode == "paths") {
        maze::Maze world = [&] {
            if (!o.source.empty()) {
                std::ifstream is(o.source);
                if (!is) throw DataError("cannot open maze file " + o.source);
                return maze::Maze::load(is);
            }
            return maze::generate_maze(maze::MazeStats::defaults(),
                                       Rng::substream(o.seed, "maze"));
        }();
        if (!o.source.empty()) m.add_input(o.source);
        if (!o.maze_out.empty()) {
            std::ofstream ms(o.maze_out);
            if (!ms) throw DataError("cannot open maze output " + o.maze_out);
            world.save(ms);
            m.add("output.maze", o.maze_out);
        }
        Rng rng(Rng::substream(o.seed, "generator"));
        for (std::size_t i = 0; i < o.count; ++i)
            os << maze::format_path(maze::sample_path(world, rng)) << '\n';
        m.add("emitted", std::to_string(o.count));
    } else {
        throw UsageError("--mode must be queries or paths, got " + o.mode);
    }
    os.close();
    m.add("output.data", o.out);
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
    m.write(o.out + ".manifest", ms);
    return 0;
}

// ---------------------------------------------------------------------
// ablate

struct AblateOpts {
    std::string config, data, test, generated, out;
    std::vector<double> fractions;
    std::vector<std::string> modes;
};

int cmd_ablate(const AblateOpts& o) {
    auto t0 = std::chrono::steady_clock::now();
    train::TrainConfig base = parse_config(o.config);
    auto dataset = corpus::load_parallel(o.data);
    auto test = corpus::load_parallel(o.test);
    if (test.empty()) throw DataError("empty test file " + o.test);
    std::vector<corpus::ParallelExample> generated;
    if (!o.generated.empty()) generated = corpus::load_unpaired(o.generated);

    std::vector<double> fractions = o.fractions;
    if (fractions.empty())
        fractions.assign(std::begin(train::kFractionMenu), std::end(train::kFractionMenu));
    std::vector<std::string> modes = o.modes;
    if (modes.empty()) modes = {"s2s", "minus", "plus"};

    auto run_cell = [&](double frac, const std::string& mode) -> std::string {
        try {
            train::SplitSpec spec;
            spec.fraction = frac;
            spec.mode = mode == "minus"  ? train::SplitMode::minus
                        : mode == "plus" ? train::SplitMode::plus
                                         : train::SplitMode::supervised_only;
            if (mode != "s2s" && mode != "minus" && mode != "plus")
                throw UsageError("mode must be s2s, minus or plus, got " + mode);
            if (mode == "plus" && generated.empty())
                throw DataError("plus mode needs --generated pool");
            train::Split split = train::ablation_split(dataset, spec, base.seed, generated);

            train::TrainConfig cfg = base;
            cfg.mode = mode == "s2s" ? train::ModelMode::s2s : train::ModelMode::seq4;
            // an empty pool reduces the semi-supervised model to the
            // baseline; report the same cell the baseline would produce
            if (cfg.mode == train::ModelMode::seq4 && split.unpaired.empty())
                cfg.mode = train::ModelMode::s2s;

            std::vector<std::vector<std::string>> xs, ys;
            for (const auto& ex : dataset) {
                xs.push_back(ex.x_tokens);
                ys.push_back(ex.y_tokens);
            }
            for (const auto& ex : generated) ys.push_back(ex.y_tokens);
            corpus::Vocab vx = corpus::Vocab::build(xs);
            corpus::Vocab vy = corpus::Vocab::build(ys);

            Rng init(Rng::substream(cfg.seed, "model-init"));
            model::Seq4Params params =
                model::Seq4Params::init(model_config(cfg, vx.size(), vy.size()), init);
            train::Dataset data;
            data.vocab_x = &vx;
            data.vocab_y = &vy;
            data.paired = split.paired;
            data.unpaired = split.unpaired;
            train::train(params, data, cfg);
            double acc = train::eval_exact_match(params, data, test, cfg.max_len);
            std::ostringstream cell;
            cell << std::fixed << std::setprecision(4) << acc;
            return cell.str();
        } catch (const std::exception& e) {
            std::cerr << "cell (" << frac << ", " << mode << ") failed: " << e.what() << "\n";
            return "FAIL";
        }
    };

    std::vector<std::vector<std::string>> table;
    for (double f : fractions) {
        std::vector<std::string> row;
        std::ostringstream fr;
        fr << std::fixed << std::setprecision(2) << f;
        row.push_back(fr.str());
        for (const auto& mode : modes) row.push_back(run_cell(f, mode));
        table.push_back(std::move(row));
    }

    auto emit = [&](std::ostream& os, bool aligned) {
        std::vector<std::string> header{"fraction"};
        for (const auto& mode : modes)
            header.push_back(mode == "s2s" ? "S2S" : mode == "minus" ? "SEQ4-" : "SEQ4+");
        auto put_row = [&](const std::vector<std::string>& row) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (aligned)
                    os << (i ? "  " : "") << std::setw(8) << row[i];
                else
                    os << (i ? "\t" : "") << row[i];
            }
            os << '\n';
        };
        put_row(header);
        for (const auto& row : table) put_row(row);
    };

    emit(std::cout, true);
    if (!o.out.empty()) {
        std::ofstream tsv(o.out + ".tsv");
        emit(tsv, false);
        std::ofstream txt(o.out + ".txt");
        emit(txt, true);
        Manifest m;
        m.command = "ablate";
        m.seed = base.seed;
        m.add_input(o.config);
        m.add_input(o.data);
        m.add_input(o.test);
        if (!o.generated.empty()) m.add_input(o.generated);
        m.add("output.tsv", o.out + ".tsv");
        m.add("output.txt", o.out + ".txt");
        double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                              t0)
                        .count();
        m.write(o.out + ".manifest", ms);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"seq4: semi-supervised sequential autoencoder for sequence transduction"};
    app.require_subcommand(1);

    TrainOpts train_opts;
    auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
    train_cmd->add_option("--config", train_opts.config, "key = value config file")->required();
    train_cmd->add_option("--data", train_opts.data, "paired TSV (x <tab> y)")->required();
    train_cmd->add_option("--unpaired", train_opts.unpaired, "unpaired y-side pool");
    train_cmd->add_option("--validation", train_opts.validation, "validation TSV for early stopping");
    train_cmd->add_option("--out", train_opts.out, "checkpoint directory")->required();

    EvalOpts eval_opts;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    eval_cmd->add_option("--checkpoint", eval_opts.checkpoint, "checkpoint directory")->required();
    eval_cmd->add_option("--test", eval_opts.test, "test TSV")->required();
    eval_cmd->add_option("--task", eval_opts.task, "query (exact match) or sail (final state)");
    eval_cmd->add_option("--maze", eval_opts.maze_file, "maze file (sail)");
    eval_cmd->add_option("--paths", eval_opts.paths_file, "gold path records (sail)");

    GenerateOpts gen_opts;
    auto* gen_cmd = app.add_subcommand("generate", "sample synthetic data");
    gen_cmd->add_option("--mode", gen_opts.mode, "queries or paths");
    gen_cmd->add_option("--source", gen_opts.source, "KN training corpus / maze file");
    gen_cmd->add_option("--count", gen_opts.count, "number of samples");
    gen_cmd->add_option("--seed", gen_opts.seed, "random seed");
    gen_cmd->add_option("--max-len", gen_opts.max_len, "sample length cap");
    gen_cmd->add_option("--exclude", gen_opts.exclude, "sequences the sampler must avoid");
    gen_cmd->add_option("--maze-out", gen_opts.maze_out, "write the generated maze here");
    gen_cmd->add_option("--out", gen_opts.out, "output file")->required();

    AblateOpts abl_opts;
    auto* abl_cmd = app.add_subcommand("ablate", "run the supervision-fraction sweep");
    abl_cmd->add_option("--config", abl_opts.config, "key = value config file")->required();
    abl_cmd->add_option("--data", abl_opts.data, "full paired dataset")->required();
    abl_cmd->add_option("--test", abl_opts.test, "held-out test TSV")->required();
    abl_cmd->add_option("--generated", abl_opts.generated, "generated pool for plus mode");
    abl_cmd->add_option("--fractions", abl_opts.fractions, "supervision fractions");
    abl_cmd->add_option("--modes", abl_opts.modes, "columns: s2s, minus, plus");
    abl_cmd->add_option("--out", abl_opts.out, "output prefix");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) return cmd_train(train_opts);
        if (eval_cmd->parsed()) return cmd_eval(eval_opts);
        if (gen_cmd->parsed()) return cmd_generate(gen_opts);
        if (abl_cmd->parsed()) return cmd_ablate(abl_opts);
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ad::ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const corpus::ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const train::NumericalAbort& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 3;
    }
}
