#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "blockforge/nn/tape.hpp"
#include "blockforge/obsgraph.hpp"
#include "blockforge/rng.hpp"

namespace blockforge::nn {

// Named tensor collection; order is the canonical flattening order.
struct Params {
    std::vector<std::string> names;
    std::vector<Mat> t;
    std::map<std::string, int> index;

    int add(const std::string& name, Mat m) {
        if (index.count(name)) throw std::logic_error("duplicate param: " + name);
        index[name] = static_cast<int>(t.size());
        names.push_back(name);
        t.push_back(std::move(m));
        return static_cast<int>(t.size()) - 1;
    }
    size_t scalar_count() const {
        size_t n = 0;
        for (const auto& m : t) n += m.size();
        return n;
    }
};

// Fan-average uniform init, biases zero.
inline void glorot(Mat& m, Rng& rng) {
    double limit = std::sqrt(6.0 / (m.rows + m.cols));
    for (auto& x : m.a) x = rng.uniform(-limit, limit);
}

struct MlpSpec {
    int w0 = -1, b0 = -1, w1 = -1, b1 = -1, w2 = -1, b2 = -1;
    int in = 0, out = 0;
};

// Two hidden layers of `hidden` units with rectifier nonlinearity.
inline MlpSpec add_mlp(Params& p, const std::string& prefix, int in, int hidden, int out,
                       Rng& rng) {
    MlpSpec s;
    s.in = in;
    s.out = out;
    Mat w0(in, hidden), w1(hidden, hidden), w2(hidden, out);
    glorot(w0, rng);
    glorot(w1, rng);
    glorot(w2, rng);
    s.w0 = p.add(prefix + ".w0", std::move(w0));
    s.b0 = p.add(prefix + ".b0", Mat(1, hidden));
    s.w1 = p.add(prefix + ".w1", std::move(w1));
    s.b1 = p.add(prefix + ".b1", Mat(1, hidden));
    s.w2 = p.add(prefix + ".w2", std::move(w2));
    s.b2 = p.add(prefix + ".b2", Mat(1, out));
    return s;
}

struct GruSpec {
    int wz = -1, uz = -1, bz = -1;
    int wr = -1, ur = -1, br = -1;
    int wh = -1, uh = -1, bh = -1;
    int dim = 0;
};

inline GruSpec add_gru(Params& p, const std::string& prefix, int dim, Rng& rng) {
    GruSpec s;
    s.dim = dim;
    auto mk = [&](const char* name) {
        Mat m(dim, dim);
        glorot(m, rng);
        return p.add(prefix + name, std::move(m));
    };
    s.wz = mk(".wz");
    s.uz = mk(".uz");
    s.bz = p.add(prefix + ".bz", Mat(1, dim));
    s.wr = mk(".wr");
    s.ur = mk(".ur");
    s.br = p.add(prefix + ".br", Mat(1, dim));
    s.wh = mk(".wh");
    s.uh = mk(".uh");
    s.bh = p.add(prefix + ".bh", Mat(1, dim));
    return s;
}

struct GNConfig {
    int node_in = kFeatDim;
    int edge_in = 1;
    int glob_in = 1;
    int latent = 16;
    int hidden = 64;
    int n_offsets = 15;
    bool global_head = false;  // absolute-action Q head decoded from globals
    int global_actions = 0;

    int q_cols() const { return 2 * n_offsets; }
};

// Encode-process-decode graph network with edge Q decoding. The recurrent
// core concatenates [encoding, previous core output, previous recurrent
// state] per part, applies a full GN block, and feeds per-part GRUs; Q
// values decode from the final recurrent state.
struct GNParams {
    GNConfig cfg;
    Params p;
    MlpSpec enc_n, enc_e, enc_g;
    MlpSpec core_e, core_n, core_g;
    GruSpec gru_n, gru_e, gru_g;
    MlpSpec dec_n, dec_e, dec_g;
    MlpSpec qhead;
    MlpSpec ghead;  // only populated when cfg.global_head

    static GNParams init(const GNConfig& cfg, Rng rng) {
        GNParams n;
        n.cfg = cfg;
        int L = cfg.latent, H = cfg.hidden;
        n.enc_n = add_mlp(n.p, "enc.node", cfg.node_in, H, L, rng);
        n.enc_e = add_mlp(n.p, "enc.edge", cfg.edge_in, H, L, rng);
        n.enc_g = add_mlp(n.p, "enc.glob", cfg.glob_in, H, L, rng);
        n.core_e = add_mlp(n.p, "core.edge", 12 * L, H, L, rng);
        n.core_n = add_mlp(n.p, "core.node", 7 * L, H, L, rng);
        n.core_g = add_mlp(n.p, "core.glob", 5 * L, H, L, rng);
        n.gru_e = add_gru(n.p, "gru.edge", L, rng);
        n.gru_n = add_gru(n.p, "gru.node", L, rng);
        n.gru_g = add_gru(n.p, "gru.glob", L, rng);
        n.dec_n = add_mlp(n.p, "dec.node", L, H, L, rng);
        n.dec_e = add_mlp(n.p, "dec.edge", L, H, L, rng);
        n.dec_g = add_mlp(n.p, "dec.glob", L, H, L, rng);
        n.qhead = add_mlp(n.p, "qhead", 2 * L, H, cfg.q_cols(), rng);
        if (cfg.global_head) n.ghead = add_mlp(n.p, "ghead", L, H, cfg.global_actions, rng);
        return n;
    }
};

// Batched graph structure: nodes/edges of all graphs concatenated, with
// per-element graph indices for segment aggregation.
struct GraphSpec {
    int n_nodes = 0, n_edges = 0, n_graphs = 0;
    std::vector<int> send, recv;
    std::vector<int> edge_graph, node_graph;
};

struct GraphInputs {
    Mat nodes, edges, globs;
};

inline void append_graph(GraphSpec& spec, GraphInputs& in, const ObsGraph& g, int feat_dim) {
    int node_base = spec.n_nodes;
    int gi = spec.n_graphs;
    int n = static_cast<int>(g.nodes.size());
    Mat nodes(spec.n_nodes + n, feat_dim);
    for (int i = 0; i < spec.n_nodes; ++i)
        for (int j = 0; j < feat_dim; ++j) nodes(i, j) = in.nodes(i, j);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < feat_dim; ++j) nodes(spec.n_nodes + i, j) = g.nodes[i][j];
    in.nodes = std::move(nodes);

    int e = static_cast<int>(g.edges.size());
    Mat edges(spec.n_edges + e, 1);  // edge features are zeros
    for (int i = 0; i < spec.n_edges; ++i) edges(i, 0) = in.edges(i, 0);
    in.edges = std::move(edges);

    Mat globs(gi + 1, 1);
    for (int i = 0; i < gi; ++i) globs(i, 0) = in.globs(i, 0);
    in.globs = std::move(globs);

    for (const auto& [s, r] : g.edges) {
        spec.send.push_back(node_base + s);
        spec.recv.push_back(node_base + r);
        spec.edge_graph.push_back(gi);
    }
    for (int i = 0; i < n; ++i) spec.node_graph.push_back(gi);
    spec.n_nodes += n;
    spec.n_edges += e;
    spec.n_graphs += 1;
}

inline std::pair<GraphSpec, GraphInputs> single_graph(const ObsGraph& g, int feat_dim = kFeatDim) {
    GraphSpec spec;
    GraphInputs in;
    in.nodes = Mat(0, feat_dim);
    in.edges = Mat(0, 1);
    in.globs = Mat(0, 1);
    append_graph(spec, in, g, feat_dim);
    return {spec, in};
}

struct ForwardResult {
    Tape::Ref q_edges = -1;   // E x (2 * n_offsets)
    Tape::Ref q_global = -1;  // B x global_actions when the head is enabled
    std::vector<Tape::Ref> param_refs;
};

namespace detail {

inline Tape::Ref apply_mlp(Tape& t, const std::vector<Tape::Ref>& pr, const MlpSpec& s,
                           Tape::Ref x) {
    auto h0 = t.relu(t.add_row(t.matmul(x, pr[s.w0]), pr[s.b0]));
    auto h1 = t.relu(t.add_row(t.matmul(h0, pr[s.w1]), pr[s.b1]));
    return t.add_row(t.matmul(h1, pr[s.w2]), pr[s.b2]);
}

// h' = (1 - z) * h + z * htilde
inline Tape::Ref apply_gru(Tape& t, const std::vector<Tape::Ref>& pr, const GruSpec& s,
                           Tape::Ref x, Tape::Ref h) {
    auto z = t.sigmoid(t.add_row(t.add(t.matmul(x, pr[s.wz]), t.matmul(h, pr[s.uz])), pr[s.bz]));
    auto r = t.sigmoid(t.add_row(t.add(t.matmul(x, pr[s.wr]), t.matmul(h, pr[s.ur])), pr[s.br]));
    auto hh = t.tanh_act(
        t.add_row(t.add(t.matmul(x, pr[s.wh]), t.matmul(t.mul(r, h), pr[s.uh])), pr[s.bh]));
    return t.add(t.mul(t.one_minus(z), h), t.mul(z, hh));
}

}  // namespace detail

inline ForwardResult gn_forward_tape(Tape& t, const GNParams& net, const GraphSpec& spec,
                                     const GraphInputs& in, int n_rec, bool params_need_grad) {
    using detail::apply_gru;
    using detail::apply_mlp;
    ForwardResult out;
    auto& pr = out.param_refs;
    pr.reserve(net.p.t.size());
    for (const auto& m : net.p.t) pr.push_back(t.leaf(m, params_need_grad));

    auto n_raw = t.leaf(in.nodes);
    auto e_raw = t.leaf(in.edges);
    auto g_raw = t.leaf(in.globs);

    auto enc_n = apply_mlp(t, pr, net.enc_n, n_raw);
    auto enc_e = apply_mlp(t, pr, net.enc_e, e_raw);
    auto enc_g = apply_mlp(t, pr, net.enc_g, g_raw);

    auto core_n = enc_n, core_e = enc_e, core_g = enc_g;
    auto rec_n = enc_n, rec_e = enc_e, rec_g = enc_g;

    for (int step = 0; step < n_rec; ++step) {
        auto cat_n = t.concat_cols({enc_n, core_n, rec_n});
        auto cat_e = t.concat_cols({enc_e, core_e, rec_e});
        auto cat_g = t.concat_cols({enc_g, core_g, rec_g});

        auto e_in = t.concat_cols({cat_e, t.gather_rows(cat_n, spec.send),
                                   t.gather_rows(cat_n, spec.recv),
                                   t.gather_rows(cat_g, spec.edge_graph)});
        auto ce = apply_mlp(t, pr, net.core_e, e_in);
        auto n_in = t.concat_cols({cat_n, t.scatter_sum_rows(ce, spec.recv, spec.n_nodes),
                                   t.gather_rows(cat_g, spec.node_graph)});
        auto cn = apply_mlp(t, pr, net.core_n, n_in);
        auto g_in = t.concat_cols({cat_g, t.scatter_sum_rows(ce, spec.edge_graph, spec.n_graphs),
                                   t.scatter_sum_rows(cn, spec.node_graph, spec.n_graphs)});
        auto cg = apply_mlp(t, pr, net.core_g, g_in);

        rec_e = apply_gru(t, pr, net.gru_e, ce, rec_e);
        rec_n = apply_gru(t, pr, net.gru_n, cn, rec_n);
        rec_g = apply_gru(t, pr, net.gru_g, cg, rec_g);
        core_e = ce;
        core_n = cn;
        core_g = cg;
    }

    auto dec_e = apply_mlp(t, pr, net.dec_e, rec_e);
    auto dec_g = apply_mlp(t, pr, net.dec_g, rec_g);

    auto q_in = t.concat_cols({dec_e, t.gather_rows(dec_g, spec.edge_graph)});
    out.q_edges = apply_mlp(t, pr, net.qhead, q_in);
    if (net.cfg.global_head) out.q_global = apply_mlp(t, pr, net.ghead, dec_g);
    return out;
}

// Value-only forward.
inline Mat gn_forward(const GNParams& net, const GraphSpec& spec, const GraphInputs& in,
                      int n_rec) {
    Tape t;
    auto r = gn_forward_tape(t, net, spec, in, n_rec, false);
    return t.val(r.q_edges);
}

inline Mat gn_forward(const GNParams& net, const ObsGraph& g, int n_rec) {
    auto [spec, in] = single_graph(g);
    return gn_forward(net, spec, in, n_rec);
}

// --- Checkpoints: flat binary tensor archive + JSON manifest --------------

inline void save_params(const Params& p, const std::string& bin_path,
                        const std::string& manifest_path) {
    std::ofstream bin(bin_path, std::ios::binary);
    if (!bin) throw std::runtime_error("cannot write " + bin_path);
    nlohmann::json tensors = nlohmann::json::array();
    size_t offset = 0;
    for (size_t i = 0; i < p.t.size(); ++i) {
        const Mat& m = p.t[i];
        bin.write(reinterpret_cast<const char*>(m.a.data()),
                  static_cast<std::streamsize>(m.size() * sizeof(double)));
        tensors.push_back({{"name", p.names[i]},
                           {"shape", {m.rows, m.cols}},
                           {"offset", offset}});
        offset += m.size() * sizeof(double);
    }
    nlohmann::json manifest{{"version", 1}, {"dtype", "float64"}, {"tensors", tensors}};
    std::ofstream mf(manifest_path);
    mf << manifest.dump(2) << "\n";
}

inline void load_params(Params& p, const std::string& bin_path,
                        const std::string& manifest_path) {
    std::ifstream mf(manifest_path);
    if (!mf) throw std::runtime_error("cannot read " + manifest_path);
    nlohmann::json manifest = nlohmann::json::parse(mf);
    if (manifest.at("version").get<int>() != 1)
        throw std::runtime_error("unsupported checkpoint version");
    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) throw std::runtime_error("cannot read " + bin_path);
    for (const auto& tj : manifest.at("tensors")) {
        const std::string name = tj.at("name").get<std::string>();
        auto it = p.index.find(name);
        if (it == p.index.end()) throw std::runtime_error("unknown tensor in checkpoint: " + name);
        Mat& m = p.t[it->second];
        int r = tj.at("shape").at(0).get<int>(), c = tj.at("shape").at(1).get<int>();
        if (r != m.rows || c != m.cols) throw std::runtime_error("shape mismatch for " + name);
        bin.seekg(static_cast<std::streamoff>(tj.at("offset").get<size_t>()));
        bin.read(reinterpret_cast<char*>(m.a.data()),
                 static_cast<std::streamsize>(m.size() * sizeof(double)));
    }
}

}  // namespace blockforge::nn
