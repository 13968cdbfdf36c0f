// Command-line surface: generate toy data, train, roll forward or backward,
// run the goal-conditioned pipeline, evaluate metrics, self-test.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "rgns/identity_model.hpp"
#include "rgns/metrics.hpp"
#include "rgns/threading.hpp"
#include "rgns/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rgns;

namespace {

struct GlobalOpts {
    std::uint64_t seed = 1;
    int threads = 1;
    std::string precision = "single";
};

std::vector<fs::path> list_trajectory_files(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".rgns") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw config_error("no .rgns trajectories in " + dir.string());
    return files;
}

std::vector<Trajectory> load_trajectories(const fs::path& dir) {
    std::vector<Trajectory> trajs;
    for (const auto& f : list_trajectory_files(dir)) trajs.push_back(read_trajectory(f));
    return trajs;
}

TrainConfig train_config_from_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config: " + path.string());
    json j = json::parse(in);
    TrainConfig tc;
    tc.k = j.value("k", tc.k);
    tc.latent = j.value("latent", tc.latent);
    tc.hidden = j.value("hidden", tc.hidden);
    tc.layers = j.value("layers", tc.layers);
    tc.n_materials = j.value("n_materials", tc.n_materials);
    tc.lr0 = j.value("lr0", tc.lr0);
    tc.total_steps = j.value("total_steps", tc.total_steps);
    tc.batch_size = j.value("batch_size", tc.batch_size);
    tc.noise_std = j.value("noise_std", tc.noise_std);
    tc.eval_every = j.value("eval_every", tc.eval_every);
    tc.patience = j.value("patience", tc.patience);
    tc.val_fraction = j.value("val_fraction", tc.val_fraction);
    tc.seed = j.value("seed", tc.seed);
    const std::string loss = j.value("loss_mode", std::string("bidirectional"));
    if (loss == "bidirectional")
        tc.loss_mode = LossMode::bidirectional;
    else if (loss == "forward_only")
        tc.loss_mode = LossMode::forward_only;
    else
        throw config_error("config: loss_mode must be bidirectional|forward_only");
    const std::string codec = j.value("codec", std::string("ilp"));
    if (codec == "ilp")
        tc.codec = CodecMode::ilp;
    else if (codec == "mlp")
        tc.codec = CodecMode::mlp;
    else
        throw config_error("config: codec must be ilp|mlp");
    const std::string edges = j.value("edge_mode", std::string("fixed"));
    if (edges == "fixed")
        tc.edge_mode = EdgeMode::fixed;
    else if (edges == "updated")
        tc.edge_mode = EdgeMode::updated;
    else
        throw config_error("config: edge_mode must be fixed|updated");
    const std::string backward = j.value("backward", std::string("recompute"));
    if (backward == "recompute")
        tc.backward = BackwardMode::recompute;
    else if (backward == "stored")
        tc.backward = BackwardMode::stored;
    else
        throw config_error("config: backward must be recompute|stored");
    return tc;
}

json diag_json(const std::vector<StepDiag>& diags) {
    json arr = json::array();
    for (const auto& d : diags)
        arr.push_back({{"edges", d.edge_count},
                       {"out_of_box", d.out_of_box},
                       {"codec_residual", d.codec_residual}});
    return arr;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path.string());
    out << text;
}

// ---------------------------------------------------------------- commands

struct GenOpts {
    ToyGenConfig cfg;
    int count = 1;
    fs::path out_dir;
    bool csv = false;
};

int cmd_gen(const GlobalOpts& g, const GenOpts& o) {
    fs::create_directories(o.out_dir);
    for (int i = 0; i < o.count; ++i) {
        ToyGenConfig cfg = o.cfg;
        cfg.seed = g.seed + static_cast<std::uint64_t>(i);
        const Trajectory traj = generate_trajectory(cfg);
        char name[32];
        std::snprintf(name, sizeof(name), "traj_%04d.rgns", i);
        write_trajectory(traj, o.out_dir / name);
        if (o.csv) {
            std::snprintf(name, sizeof(name), "traj_%04d.csv", i);
            write_frames_csv(o.out_dir / name, traj);
        }
    }
    std::cout << "wrote " << o.count << " trajectories to " << o.out_dir.string() << "\n";
    return 0;
}

struct TrainOpts {
    fs::path config, data_dir, out, log;
    long override_steps = -1;
};

template <std::floating_point T>
int cmd_train(const GlobalOpts& g, const TrainOpts& o) {
    TrainConfig tc = o.config.empty() ? TrainConfig{} : train_config_from_json(o.config);
    if (o.override_steps >= 0) tc.total_steps = o.override_steps;
    if (g.seed != 1) tc.seed = g.seed;
    const auto trajs = load_trajectories(o.data_dir);
    std::ofstream log;
    if (!o.log.empty()) {
        log.open(o.log, std::ios::trunc);
        if (!log) throw io_error("cannot open log: " + o.log.string());
    }
    auto res = train<T>(tc, trajs, o.log.empty() ? nullptr : &log);
    save_checkpoint(o.out, res.model, tc, res.steps_run);
    std::cout << "trained " << res.steps_run << " steps; validation one-step MSE "
              << res.untrained_val_mse << " -> " << res.final_val_mse << "\n"
              << "checkpoint: " << o.out.string() << "\n";
    return 0;
}

struct RollOpts {
    fs::path ckpt, traj_path, out;
    int steps = 40;
    int start = -1;  // default: first/last valid frame
};

template <std::floating_point T>
json manifest_header(const GlobalOpts& g, const ModelParams<T>& m, const TrainConfig& tc) {
    json j;
    j["seed"] = g.seed;
    j["threads"] = g.threads;
    j["precision"] = g.precision;
    j["model"] = {{"dims", m.cfg.dims},         {"k", m.cfg.k},
                  {"latent", m.cfg.latent},     {"hidden", m.cfg.hidden},
                  {"layers", m.cfg.layers},     {"radius", m.cfg.radius},
                  {"dt", m.cfg.dt},             {"n_materials", m.cfg.n_materials},
                  {"codec", m.cfg.codec == CodecMode::ilp ? "ilp" : "mlp"},
                  {"edge_mode", m.cfg.edge_mode == EdgeMode::fixed ? "fixed" : "updated"}};
    j["train"] = {{"lr0", tc.lr0},
                  {"total_steps", tc.total_steps},
                  {"batch_size", tc.batch_size},
                  {"noise_std", tc.noise_std},
                  {"loss_mode", tc.loss_mode == LossMode::bidirectional ? "bidirectional"
                                                                        : "forward_only"}};
    return j;
}

template <std::floating_point T>
int cmd_rollout(const GlobalOpts& g, const RollOpts& o) {
    if (o.steps < 1) throw config_error("rollout: steps must be >= 1");
    TrainConfig tc;
    ModelParams<T> m = load_checkpoint<T>(o.ckpt, &tc);
    const Trajectory traj = read_trajectory(o.traj_path);
    const int t0 = o.start >= 0 ? o.start : m.cfg.k;
    const StepState s0 = state_from_trajectory(traj, t0, m.cfg.k);
    if (t0 + o.steps > traj.n_steps - 1)
        throw config_error("rollout: steps reach past the trajectory end");
    const RolloutResult r = rollout(m, s0, o.steps);
    const double mse = rollout_mse(r, traj);

    write_frames_csv(fs::path(o.out.string() + ".csv"), r.frames);
    json man = manifest_header(g, m, tc);
    man["command"] = "rollout";
    man["start"] = t0;
    man["steps"] = o.steps;
    man["rollout_mse"] = mse;
    man["diagnostics"] = diag_json(r.diags);
    write_text(fs::path(o.out.string() + ".manifest.json"), man.dump(2) + "\n");
    std::cout << "rollout_mse " << mse << "\n";
    return 0;
}

template <std::floating_point T>
int cmd_invert(const GlobalOpts& g, const RollOpts& o) {
    if (o.steps < 1) throw config_error("invert: steps must be >= 1");
    TrainConfig tc;
    ModelParams<T> m = load_checkpoint<T>(o.ckpt, &tc);
    const Trajectory traj = read_trajectory(o.traj_path);
    const int t0 = o.start >= 0 ? o.start : traj.n_steps - 1;
    if (t0 - o.steps < 0) throw config_error("invert: steps reach past the trajectory start");
    const StepState s0 = state_from_trajectory(traj, t0, m.cfg.k);
    const RolloutResult r = inverse_rollout(m, s0, o.steps);
    const double mse = rollout_mse(r, traj);
    double mean_residual = 0;
    for (const auto& d : r.diags) mean_residual += d.codec_residual;
    mean_residual /= static_cast<double>(r.diags.size());

    write_frames_csv(fs::path(o.out.string() + ".csv"), r.frames);
    json man = manifest_header(g, m, tc);
    man["command"] = "invert";
    man["start"] = t0;
    man["steps"] = o.steps;
    man["position_mse_vs_truth"] = mse;
    man["mean_codec_residual"] = mean_residual;
    man["diagnostics"] = diag_json(r.diags);
    write_text(fs::path(o.out.string() + ".manifest.json"), man.dump(2) + "\n");
    std::cout << "position_mse_vs_truth " << mse << "\nmean_codec_residual " << mean_residual
              << "\n";
    return 0;
}

struct GoalOpts {
    fs::path ckpt, mask_path, out;
    int steps = 20;
    int n_max = 4096;
};

template <std::floating_point T>
int cmd_goal(const GlobalOpts& g, const GoalOpts& o) {
    TrainConfig tc;
    ModelParams<T> m = load_checkpoint<T>(o.ckpt, &tc);
    if (m.cfg.dims != 2) throw config_error("goal: mask targets are 2-D");
    const Mask mask = load_mask(o.mask_path);
    const StepState target = rasterize_target(mask, m.cfg.box_lo, m.cfg.box_hi, o.n_max, m.cfg.k);
    const GoalResult<T> res = goal_condition(m, target, o.steps);

    write_frames_csv(fs::path(o.out.string() + ".inferred.csv"), res.inferred.frames);
    write_frames_csv(fs::path(o.out.string() + ".reproduced.csv"), res.reproduced.frames);
    json man = manifest_header(g, m, tc);
    man["command"] = "goal";
    man["steps"] = o.steps;
    man["particles"] = target.n;
    man["consistency_mse"] = res.consistency_mse;
    man["inverse_diagnostics"] = diag_json(res.inferred.diags);
    man["forward_diagnostics"] = diag_json(res.reproduced.diags);
    write_text(fs::path(o.out.string() + ".manifest.json"), man.dump(2) + "\n");
    std::cout << "consistency_mse " << res.consistency_mse << "\n";
    return 0;
}

struct EvalOpts {
    fs::path ckpt, data_dir, out;
    int steps = 40;
    std::vector<int> consistency_ks = {1, 10, 40};
};

template <std::floating_point T>
int cmd_eval(const GlobalOpts& g, const EvalOpts& o) {
    (void)g;
    TrainConfig tc;
    ModelParams<T> m = load_checkpoint<T>(o.ckpt, &tc);
    const auto trajs = load_trajectories(o.data_dir);
    MetricReport rep;
    const auto t_start = std::chrono::steady_clock::now();

    double ot_sum = 0, mmd_sum = 0, roll_sum = 0;
    std::map<int, double> cons_sum;
    int counted = 0;
    const auto clock_ms = [](auto a, auto b) {
        return std::chrono::duration<double>(b - a).count();
    };
    auto t_roll = std::chrono::steady_clock::now();
    for (const auto& traj : trajs) {
        const int t0 = m.cfg.k;
        const int steps = std::min(o.steps, traj.n_steps - 1 - t0);
        if (steps < 1) continue;
        const RolloutResult r = rollout(m, state_from_trajectory(traj, t0, m.cfg.k), steps);
        roll_sum += rollout_mse(r, traj);
        const StepState& last = r.frames.back();
        std::vector<double> truth(static_cast<std::size_t>(traj.n_particles) * traj.dims);
        for (int i = 0; i < traj.n_particles; ++i)
            for (int d = 0; d < traj.dims; ++d)
                truth[static_cast<std::size_t>(i) * traj.dims + d] = traj.pos(t0 + steps, i, d);
        ot_sum += ot_distance(last.positions, truth, traj.dims);
        mmd_sum += mmd(last.positions, truth, traj.dims);
        ++counted;
    }
    rep.timings_sec["rollout"] = clock_ms(t_roll, std::chrono::steady_clock::now());
    if (counted == 0) throw config_error("eval: no trajectory long enough for the rollout horizon");
    rep.rollout = roll_sum / counted;
    rep.ot = ot_sum / counted;
    rep.mmd_value = mmd_sum / counted;

    auto t_cons = std::chrono::steady_clock::now();
    for (int K : o.consistency_ks) {
        double s = 0;
        int n = 0;
        for (const auto& traj : trajs) {
            if (traj.n_steps - 1 < m.cfg.k) continue;
            s += consistency_mse(m, state_from_trajectory(traj, traj.n_steps - 1, m.cfg.k), K);
            ++n;
        }
        cons_sum[K] = s / std::max(1, n);
    }
    rep.consistency = cons_sum;
    rep.timings_sec["consistency"] = clock_ms(t_cons, std::chrono::steady_clock::now());
    rep.timings_sec["total"] = clock_ms(t_start, std::chrono::steady_clock::now());

    const std::string text = metric_report_json(rep) + "\n";
    if (!o.out.empty()) write_text(o.out, text);
    std::cout << text;
    return 0;
}

int cmd_selftest();

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"reversible graph-network particle simulator"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--seed", g.seed, "global RNG seed")->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads")->capture_default_str();
    app.add_option("--precision", g.precision, "working precision")
        ->check(CLI::IsMember({"single", "double"}))
        ->capture_default_str();

    GenOpts gen;
    auto* c_gen = app.add_subcommand("gen", "generate toy dissipative trajectories");
    c_gen->add_option("--out", gen.out_dir, "output directory")->required();
    c_gen->add_option("--count", gen.count, "number of trajectories")->capture_default_str();
    c_gen->add_option("--dims", gen.cfg.dims)->capture_default_str();
    c_gen->add_option("--particles", gen.cfg.n_particles)->capture_default_str();
    c_gen->add_option("--steps", gen.cfg.n_steps)->capture_default_str();
    c_gen->add_option("--dt", gen.cfg.dt)->capture_default_str();
    c_gen->add_option("--box-lo", gen.cfg.box_lo, "box lower corner")->expected(-1);
    c_gen->add_option("--box-hi", gen.cfg.box_hi, "box upper corner")->expected(-1);
    c_gen->add_option("--gravity", gen.cfg.gravity, "gravity vector")->expected(-1);
    c_gen->add_option("--damping", gen.cfg.damping)->capture_default_str();
    c_gen->add_option("--stiffness", gen.cfg.repulsion_stiffness)->capture_default_str();
    c_gen->add_option("--repulsion-radius", gen.cfg.repulsion_radius)->capture_default_str();
    c_gen->add_option("--restitution", gen.cfg.restitution)->capture_default_str();
    c_gen->add_option("--radius", gen.cfg.radius, "connectivity radius")->capture_default_str();
    c_gen->add_flag("--csv", gen.csv, "also export frames as CSV");

    TrainOpts tr;
    auto* c_train = app.add_subcommand("train", "train a model on a data directory");
    c_train->add_option("--config", tr.config, "JSON training config");
    c_train->add_option("--data", tr.data_dir, "directory of .rgns files")->required();
    c_train->add_option("--out", tr.out, "output checkpoint")->required();
    c_train->add_option("--log", tr.log, "JSONL training log");
    c_train->add_option("--steps", tr.override_steps, "override total_steps");

    RollOpts ro;
    auto* c_roll = app.add_subcommand("rollout", "forward rollout against a trajectory");
    c_roll->add_option("--ckpt", ro.ckpt)->required();
    c_roll->add_option("--traj", ro.traj_path)->required();
    c_roll->add_option("--steps", ro.steps)->capture_default_str();
    c_roll->add_option("--start", ro.start, "start frame (default k)");
    c_roll->add_option("--out", ro.out, "output prefix")->required();

    RollOpts io_;
    auto* c_inv = app.add_subcommand("invert", "inverse rollout against a trajectory");
    c_inv->add_option("--ckpt", io_.ckpt)->required();
    c_inv->add_option("--traj", io_.traj_path)->required();
    c_inv->add_option("--steps", io_.steps)->capture_default_str();
    c_inv->add_option("--start", io_.start, "start frame (default last)");
    c_inv->add_option("--out", io_.out, "output prefix")->required();

    GoalOpts go;
    auto* c_goal = app.add_subcommand("goal", "goal-conditioned inference from an occupancy mask");
    c_goal->add_option("--ckpt", go.ckpt)->required();
    c_goal->add_option("--mask", go.mask_path, "text mask of '.'/'#' rows")->required();
    c_goal->add_option("--steps", go.steps)->capture_default_str();
    c_goal->add_option("--n-max", go.n_max)->capture_default_str();
    c_goal->add_option("--out", go.out, "output prefix")->required();

    EvalOpts ev;
    auto* c_eval = app.add_subcommand("eval", "metric report over a data directory");
    c_eval->add_option("--ckpt", ev.ckpt)->required();
    c_eval->add_option("--data", ev.data_dir)->required();
    c_eval->add_option("--steps", ev.steps, "rollout horizon")->capture_default_str();
    c_eval->add_option("--consistency-ks", ev.consistency_ks, "K values")->expected(-1);
    c_eval->add_option("--out", ev.out, "write the JSON report here too");

    auto* c_self = app.add_subcommand("selftest", "run the built-in invariant suite");

    CLI11_PARSE(app, argc, argv);
    set_threads(g.threads);
    const bool dbl = g.precision == "double";

    try {
        if (c_gen->parsed()) return cmd_gen(g, gen);
        if (c_train->parsed()) return dbl ? cmd_train<double>(g, tr) : cmd_train<float>(g, tr);
        if (c_roll->parsed()) return dbl ? cmd_rollout<double>(g, ro) : cmd_rollout<float>(g, ro);
        if (c_inv->parsed()) return dbl ? cmd_invert<double>(g, io_) : cmd_invert<float>(g, io_);
        if (c_goal->parsed()) return dbl ? cmd_goal<double>(g, go) : cmd_goal<float>(g, go);
        if (c_eval->parsed()) return dbl ? cmd_eval<double>(g, ev) : cmd_eval<float>(g, ev);
        if (c_self->parsed()) return cmd_selftest();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

// ------------------------------------------------------------------ selftest

namespace {

int g_failures = 0;

void check(const char* name, bool ok, const std::string& detail = "") {
    std::cout << (ok ? "ok   " : "FAIL ") << name;
    if (!detail.empty()) std::cout << "  (" << detail << ")";
    std::cout << "\n";
    if (!ok) ++g_failures;
}

int cmd_selftest() {
    std::mt19937_64 rng(1);

    {  // linear codec reconstruction
        auto ilp = init_ilp<double>(64, 15, rng);
        double worst = 0;
        std::normal_distribution<double> dist(0.0, 1.0);
        for (int trial = 0; trial < 1000; ++trial) {
            Mat<double> chi(1, 15);
            for (auto& v : chi.a) v = dist(rng);
            const Mat<double> dec = ilp_decode(ilp, ilp_encode(ilp, chi));
            double err = 0;
            for (int c = 0; c < 15; ++c) {
                const double d = dec(0, c) - chi(0, c);
                err += d * d;
            }
            worst = std::max(worst, err);
        }
        check("ilp reconstruction < 1e-6", worst < 1e-6, "worst " + std::to_string(worst));
    }

    {  // reversible stack roundtrip, both precisions
        const auto run = [&]<typename T>(T) {
            std::mt19937_64 r2(7);
            auto stack = make_rrmp_stack<T>(3, 16, 32, EdgeMode::fixed, r2);
            std::vector<double> pos(50 * 2);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            for (auto& p : pos) p = u(r2);
            const std::vector<double> lo = {0, 0}, hi = {1, 1};
            auto gr = build_radius_graph(pos, 50, 2, 0.3, lo, hi);
            StackState<T> x;
            x.n1 = gaussian_mat<T>(50, 16, 1.0, r2);
            x.n2 = gaussian_mat<T>(50, 16, 1.0, r2);
            x.e1 = gaussian_mat<T>(gr.n_edges(), 16, 1.0, r2);
            x.e2 = gaussian_mat<T>(gr.n_edges(), 16, 1.0, r2);
            const auto y = stack_forward(stack, x, gr);
            const auto back = stack_inverse(stack, y, gr);
            double worst = 0;
            for (std::size_t i = 0; i < x.n1.a.size(); ++i)
                worst = std::max(worst, std::abs(static_cast<double>(back.n1.a[i]) -
                                                 static_cast<double>(x.n1.a[i])));
            for (std::size_t i = 0; i < x.n2.a.size(); ++i)
                worst = std::max(worst, std::abs(static_cast<double>(back.n2.a[i]) -
                                                 static_cast<double>(x.n2.a[i])));
            return worst;
        };
        const double wd = run(double{});
        const double wf = run(float{});
        check("rrmp roundtrip (double) <= 1e-11", wd <= 1e-11, std::to_string(wd));
        check("rrmp roundtrip (single) <= 1e-4", wf <= 1e-4, std::to_string(wf));
    }

    {  // neighbor search vs brute force
        bool ok = true;
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int trial = 0; trial < 25 && ok; ++trial) {
            const int n = 2 + static_cast<int>(u(rng) * 120);
            const int D = trial % 2 == 0 ? 2 : 3;
            std::vector<double> pos(static_cast<std::size_t>(n) * D);
            for (auto& p : pos) p = u(rng);
            const std::vector<double> lo(D, 0.0), hi(D, 1.0);
            const double r = 0.05 + 0.3 * u(rng);
            const auto g = build_radius_graph(pos, n, D, r, lo, hi);
            std::vector<Edge> brute;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    if (i != j && dist2(pos.data() + static_cast<std::size_t>(i) * D,
                                        pos.data() + static_cast<std::size_t>(j) * D, D) <= r * r)
                        brute.push_back({i, j});
            ok = g.edges.size() == brute.size();
            for (std::size_t e = 0; ok && e < brute.size(); ++e)
                ok = g.edges[e].recv == brute[e].recv && g.edges[e].send == brute[e].send;
        }
        check("cell list equals brute force", ok);
    }

    {  // exact assignment vs factorial enumeration
        bool ok = true;
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int trial = 0; trial < 20 && ok; ++trial) {
            const int n = 5;
            std::vector<double> a(n * 2), b(n * 2);
            for (auto& v : a) v = u(rng);
            for (auto& v : b) v = u(rng);
            const double fast = ot_distance(a, b, 2);
            std::vector<int> perm(n);
            for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
            double best = std::numeric_limits<double>::infinity();
            do {
                double s = 0;
                for (int i = 0; i < n; ++i) {
                    const double dx = a[static_cast<std::size_t>(i) * 2] -
                                      b[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]) * 2];
                    const double dy = a[static_cast<std::size_t>(i) * 2 + 1] -
                                      b[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]) * 2 + 1];
                    s += dx * dx + dy * dy;
                }
                best = std::min(best, s / n);
            } while (std::next_permutation(perm.begin(), perm.end()));
            ok = std::abs(fast - best) <= 1e-12;
        }
        check("exact OT equals brute force", ok);
    }

    {  // identity pipeline on a uniform-motion state
        ModelConfig cfg;
        cfg.dims = 2;
        cfg.k = 3;
        cfg.latent = 18;
        cfg.hidden = 8;
        cfg.layers = 2;
        cfg.radius = 0.25;
        auto m = make_identity_model<double>(cfg);
        StepState s;
        s.dims = 2;
        s.n = 9;
        s.k = 3;
        s.time_index = 10;
        std::uniform_real_distribution<double> u(0.35, 0.65);
        for (int i = 0; i < 9; ++i) {
            s.positions.push_back(u(rng));
            s.positions.push_back(u(rng));
        }
        s.vel_window.assign(3 * 9 * 2, 0.0);
        for (int slot = 0; slot < 3; ++slot)
            for (int i = 0; i < 9; ++i) {
                s.vel_window[(static_cast<std::size_t>(slot) * 9 + i) * 2] = 0.01;
                s.vel_window[(static_cast<std::size_t>(slot) * 9 + i) * 2 + 1] = -0.02;
            }
        s.materials.assign(9, 0);
        const double cons = consistency_mse(m, s, 10);
        check("identity pipeline consistency == 0", cons == 0.0, std::to_string(cons));
        const auto fwd = rollout(m, s, 10);
        const auto back = inverse_rollout(m, fwd.frames.back(), 10);
        check("identity roundtrip recovers positions exactly",
              back.frames.back().positions == s.positions);
    }

    {  // trajectory + checkpoint round trips
        ToyGenConfig cfg;
        cfg.n_particles = 24;
        cfg.n_steps = 30;
        const auto traj = generate_trajectory(cfg);
        const auto tmp = fs::temp_directory_path() / "rgns_selftest.rgns";
        write_trajectory(traj, tmp);
        const auto traj2 = read_trajectory(tmp);
        check("trajectory roundtrip bit-identical",
              traj.positions == traj2.positions && traj.materials == traj2.materials);
        fs::remove(tmp);
    }

    std::cout << (g_failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
    return g_failures == 0 ? 0 : 1;
}

}  // namespace
