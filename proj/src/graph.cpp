#include "ffnet/graph.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ffnet {

namespace {

std::string stage_name(std::size_t i) { return "stage" + std::to_string(i + 1); }

std::int64_t flatten_width(const NetworkSpec& spec) {
    std::int64_t h = spec.in_h, w = spec.in_w;
    for (const auto& st : spec.stages) {
        h = st.ff.out_extent(h);  // both branches agree by construction
        w = st.ff.out_extent(w);
    }
    return static_cast<std::int64_t>(spec.stage_out_channels()) * h * w;
}

}  // namespace

std::string NetworkSpec::canonical_text() const {
    const int width = stages.empty() ? 0 : stages.front().branch_width;
    std::ostringstream os;
    os << "ablation = " << (ablation ? 1 : 0) << "\n"
       << "branch_width = " << width << "\n"
       << "classes = " << num_classes << "\n"
       << "fc1 = " << fc1 << "\n"
       << "fc2 = " << fc2 << "\n"
       << "input = " << in_c << "x" << in_h << "x" << in_w << "\n"
       << "stages = " << stages.size() << "\n";
    return os.str();
}

NetworkSpec build_ffnet(int in_c, int in_h, int in_w, int num_classes,
                        int stage_count, bool ablation, int branch_width,
                        int fc1, int fc2) {
    if (in_c < 1 || in_h < 1 || in_w < 1) {
        throw std::invalid_argument("build_ffnet: input extents must be positive");
    }
    if (num_classes < 2) throw std::invalid_argument("build_ffnet: need at least 2 classes");
    if (stage_count < 1) throw std::invalid_argument("build_ffnet: need at least 1 stage");
    if (branch_width < 1 || fc1 < 1 || fc2 < 1) {
        throw std::invalid_argument("build_ffnet: widths must be positive");
    }

    NetworkSpec spec;
    spec.in_c = in_c;
    spec.in_h = in_h;
    spec.in_w = in_w;
    spec.num_classes = num_classes;
    spec.fc1 = fc1;
    spec.fc2 = fc2;
    spec.ablation = ablation;

    int ch = in_c;
    std::int64_t h = in_h, w = in_w;
    for (int i = 0; i < stage_count; ++i) {
        StageSpec st;
        st.in_channels = ch;
        st.branch_width = branch_width;
        st.deep[0] = ConvSpec{3, ch, branch_width, 1, 0, true};
        st.deep[1] = ConvSpec{3, branch_width, branch_width, 1, 0, true};
        st.deep[2] = ConvSpec{3, branch_width, branch_width, 1, 1, true};
        st.ff = ConvSpec{5, ch, branch_width, 1, 0, true};

        std::int64_t dh = h, dw = w;
        for (const auto& c : st.deep) {
            dh = c.out_extent(dh);
            dw = c.out_extent(dw);
            if (dh < 1 || dw < 1) {
                throw std::invalid_argument(
                    "build_ffnet: input too small, stage " + std::to_string(i + 1) +
                    " convolution extent reaches " + std::to_string(std::min(dh, dw)));
            }
        }
        const std::int64_t fh = st.ff.out_extent(h), fw = st.ff.out_extent(w);
        if (fh < 1 || fw < 1) {
            throw std::invalid_argument("build_ffnet: input too small for the 5x5 branch at stage " +
                                        std::to_string(i + 1));
        }
        if (fh != dh || fw != dw) {
            throw std::invalid_argument("build_ffnet: branch extents disagree");  // unreachable by construction
        }

        spec.stages.push_back(st);
        ch = ablation ? branch_width : 2 * branch_width;
        h = dh;
        w = dw;
    }
    return spec;
}

NetworkSpec spec_from_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("architecture config: expected key = value, got '" + line + "'");
        }
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }

    int in_c = 3, in_h = 32, in_w = 32, stages = 6, width = 64, fc1 = 400, fc2 = 100,
        classes = 10;
    bool ablation = false;
    for (const auto& [key, value] : kv) {
        if (key == "input") {
            if (std::sscanf(value.c_str(), "%dx%dx%d", &in_c, &in_h, &in_w) != 3) {
                throw std::invalid_argument("architecture config: input must be CxHxW");
            }
        } else if (key == "stages") {
            stages = std::stoi(value);
        } else if (key == "branch_width") {
            width = std::stoi(value);
        } else if (key == "fc1") {
            fc1 = std::stoi(value);
        } else if (key == "fc2") {
            fc2 = std::stoi(value);
        } else if (key == "classes") {
            classes = std::stoi(value);
        } else if (key == "ablation") {
            ablation = (value == "1" || value == "true");
        } else {
            throw std::invalid_argument("architecture config: unknown key '" + key + "'");
        }
    }
    return build_ffnet(in_c, in_h, in_w, classes, stages, ablation, width, fc1, fc2);
}

std::vector<NamedShape> infer_shapes(const NetworkSpec& spec) {
    std::vector<NamedShape> out;
    std::int64_t h = spec.in_h, w = spec.in_w;
    for (std::size_t i = 0; i < spec.stages.size(); ++i) {
        const auto& st = spec.stages[i];
        const std::int64_t bw = st.branch_width;
        std::int64_t dh = h, dw = w;
        const char* deep_names[3] = {".s2c1", ".s2c2", ".s2c3"};
        for (int j = 0; j < 3; ++j) {
            dh = st.deep[j].out_extent(dh);
            dw = st.deep[j].out_extent(dw);
            out.push_back({stage_name(i) + deep_names[j], Shape{1, bw, dh, dw}});
        }
        if (!spec.ablation) {
            out.push_back({stage_name(i) + ".b2c1",
                           Shape{1, bw, st.ff.out_extent(h), st.ff.out_extent(w)}});
        }
        h = dh;
        w = dw;
        out.push_back({stage_name(i) + ".s2",
                       Shape{1, spec.ablation ? bw : 2 * bw, h, w}});
    }
    out.push_back({"flatten", Shape{1, flatten_width(spec), 1, 1}});
    out.push_back({"fc1", Shape{1, spec.fc1, 1, 1}});
    out.push_back({"fc2", Shape{1, spec.fc2, 1, 1}});
    out.push_back({"out", Shape{1, spec.num_classes, 1, 1}});
    return out;
}

std::vector<std::int64_t> spatial_trace(const NetworkSpec& spec) {
    std::vector<std::int64_t> trace{spec.in_h};
    std::int64_t h = spec.in_h;
    for (const auto& st : spec.stages) {
        h = st.ff.out_extent(h);
        trace.push_back(h);
    }
    return trace;
}

ParamCount count_params(const NetworkSpec& spec) {
    ParamCount pc;
    auto add = [&pc](const std::string& name, std::int64_t count) {
        pc.rows.push_back({name, count});
        pc.total += count;
    };
    for (std::size_t i = 0; i < spec.stages.size(); ++i) {
        const auto& st = spec.stages[i];
        add(stage_name(i) + ".s2c1", st.deep[0].param_count());
        add(stage_name(i) + ".s2c2", st.deep[1].param_count());
        add(stage_name(i) + ".s2c3", st.deep[2].param_count());
        if (!spec.ablation) add(stage_name(i) + ".b2c1", st.ff.param_count());
    }
    const std::int64_t d = flatten_width(spec);
    add("fc1", d * spec.fc1 + spec.fc1);
    add("fc2", static_cast<std::int64_t>(spec.fc1) * spec.fc2 + spec.fc2);
    add("out", static_cast<std::int64_t>(spec.fc2) * spec.num_classes + spec.num_classes);
    pc.bytes = pc.total * 4;
    return pc;
}

ConvLayerCount conv_layer_count(const NetworkSpec& spec) {
    ConvLayerCount c;
    c.deep = static_cast<int>(spec.stages.size()) * 3;
    c.ff = spec.ablation ? 0 : static_cast<int>(spec.stages.size());
    return c;
}

PathDepth gradient_path_depth(const NetworkSpec& spec) {
    // dynamic program over the stage DAG: a stage contributes min(3, 1)
    // parameterized layers on the shortest path (deep vs fast-forward branch)
    // and 3 on the longest; the head adds fc1, fc2 and the output layer
    PathDepth d;
    for (std::size_t i = 0; i < spec.stages.size(); ++i) {
        d.shortest += spec.ablation ? 3 : 1;
        d.longest += 3;
    }
    d.shortest += 3;
    d.longest += 3;
    return d;
}

template <class T>
ParamEntryT<T>& ParamStoreT<T>::by_name(const std::string& name) {
    for (auto& e : entries_) {
        if (e.name == name) return e;
    }
    throw std::invalid_argument("ParamStore: no entry named '" + name + "'");
}

template <class T>
const ParamEntryT<T>& ParamStoreT<T>::by_name(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return e;
    }
    throw std::invalid_argument("ParamStore: no entry named '" + name + "'");
}

template <class T>
bool ParamStoreT<T>::has(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return true;
    }
    return false;
}

template <class T>
void ParamStoreT<T>::zero_grads() {
    for (auto& e : entries_) {
        e.g.w.fill(T(0));
        e.g.b.fill(T(0));
    }
}

template <class T>
std::int64_t ParamStoreT<T>::param_elems() const {
    std::int64_t total = 0;
    for (const auto& e : entries_) total += e.p.w.size() + e.p.b.size();
    return total;
}

template <class T>
ParamStoreT<T> init_params(const NetworkSpec& spec, std::uint64_t seed) {
    ParamStoreT<T> store;
    Rng rng(seed);
    auto add = [&](const std::string& name, std::int64_t out, std::int64_t in_w_elems,
                   std::int64_t k) {
        ParamEntryT<T> e;
        e.name = name;
        const Shape ws{out, in_w_elems, k, k};
        const double fan_in = static_cast<double>(in_w_elems) * k * k;
        const T stddev = static_cast<T>(std::sqrt(2.0 / fan_in));
        e.p.w = tensor_normal<T>(ws, T(0), stddev, rng);
        e.p.b = TensorT<T>(Shape{1, out, 1, 1});
        e.g.w = TensorT<T>(ws);
        e.g.b = TensorT<T>(Shape{1, out, 1, 1});
        e.m.w = TensorT<T>(ws);
        e.m.b = TensorT<T>(Shape{1, out, 1, 1});
        store.entries_.push_back(std::move(e));
    };
    for (std::size_t i = 0; i < spec.stages.size(); ++i) {
        const auto& st = spec.stages[i];
        add(stage_name(i) + ".s2c1", st.deep[0].out_channels, st.deep[0].in_channels, 3);
        add(stage_name(i) + ".s2c2", st.deep[1].out_channels, st.deep[1].in_channels, 3);
        add(stage_name(i) + ".s2c3", st.deep[2].out_channels, st.deep[2].in_channels, 3);
        if (!spec.ablation) {
            add(stage_name(i) + ".b2c1", st.ff.out_channels, st.ff.in_channels, 5);
        }
    }
    const std::int64_t d = flatten_width(spec);
    add("fc1", spec.fc1, d, 1);
    add("fc2", spec.fc2, spec.fc1, 1);
    add("out", spec.num_classes, spec.fc2, 1);
    return store;
}

namespace {
std::atomic<BackwardFault> g_fault{BackwardFault::none};
}

void set_backward_fault(BackwardFault f) { g_fault.store(f); }
BackwardFault backward_fault() { return g_fault.load(); }

template <class T>
TensorT<T> forward(const NetworkSpec& spec, const ParamStoreT<T>& params,
                   const TensorT<T>& x, ForwardTraceT<T>* trace) {
    if (x.shape.c != spec.in_c || x.shape.h != spec.in_h || x.shape.w != spec.in_w) {
        throw std::invalid_argument("forward: input " + x.shape.str() +
                                    " does not match spec input " +
                                    std::to_string(spec.in_c) + "x" +
                                    std::to_string(spec.in_h) + "x" +
                                    std::to_string(spec.in_w));
    }
    ForwardTraceT<T> local;
    ForwardTraceT<T>* tr = trace ? trace : &local;
    tr->stages.clear();
    tr->stages.resize(spec.stages.size());

    const TensorT<T>* cur = &x;
    for (std::size_t i = 0; i < spec.stages.size(); ++i) {
        const auto& st = spec.stages[i];
        auto& t = tr->stages[i];
        t.s1 = *cur;
        t.s2c1 = relu(conv2d_forward(t.s1, st.deep[0], params.by_name(stage_name(i) + ".s2c1").p));
        t.s2c2 = relu(conv2d_forward(t.s2c1, st.deep[1], params.by_name(stage_name(i) + ".s2c2").p));
        t.s2c3 = relu(conv2d_forward(t.s2c2, st.deep[2], params.by_name(stage_name(i) + ".s2c3").p));
        if (!spec.ablation) {
            t.b2c1 = relu(conv2d_forward(t.s1, st.ff, params.by_name(stage_name(i) + ".b2c1").p));
            t.s2 = concat_channels(t.s2c3, t.b2c1);
        } else {
            t.s2 = t.s2c3;
        }
        cur = &t.s2;
    }
    tr->fc1_out = relu(fc_forward(*cur, params.by_name("fc1").p));
    tr->fc2_out = relu(fc_forward(tr->fc1_out, params.by_name("fc2").p));
    return fc_forward(tr->fc2_out, params.by_name("out").p);
}

template <class T>
void backward(const NetworkSpec& spec, ParamStoreT<T>& params,
              const ForwardTraceT<T>& trace, const TensorT<T>& grad_logits) {
    if (trace.stages.size() != spec.stages.size() || trace.fc2_out.size() == 0) {
        throw std::invalid_argument("backward: missing or incomplete forward trace");
    }
    const BackwardFault fault = g_fault.load();
    bool fired_conv = false, fired_fc = false, fired_relu = false, fired_concat = false;

    auto negate = [](TensorT<T>& t) {
        for (auto& v : t.data) v = -v;
    };
    auto fc_back = [&](const TensorT<T>& in, const std::string& name,
                       const TensorT<T>& gout) {
        auto& e = params.by_name(name);
        auto g = fc_backward(in, e.p, gout);
        if (fault == BackwardFault::fc && !fired_fc) {
            negate(g.weights);
            fired_fc = true;
        }
        e.g.w = std::move(g.weights);
        e.g.b = std::move(g.bias);
        return std::move(g.input);
    };
    auto conv_back = [&](const TensorT<T>& in, const ConvSpec& cs,
                         const std::string& name, const TensorT<T>& gout) {
        auto& e = params.by_name(name);
        auto g = conv2d_backward(in, cs, e.p, gout);
        if (fault == BackwardFault::conv && !fired_conv) {
            negate(g.weights);
            fired_conv = true;
        }
        e.g.w = std::move(g.weights);
        e.g.b = std::move(g.bias);
        return std::move(g.input);
    };
    auto relu_back = [&](const TensorT<T>& post, const TensorT<T>& gout) {
        auto g = relu_backward(post, gout);
        if (fault == BackwardFault::relu && !fired_relu) {
            negate(g);
            fired_relu = true;
        }
        return g;
    };

    // head: out <- relu <- fc2 <- relu <- fc1 <- flatten(last s2)
    const TensorT<T>& last_s2 =
        spec.stages.empty() ? trace.fc1_out : trace.stages.back().s2;
    TensorT<T> g = fc_back(trace.fc2_out, "out", grad_logits);
    g = relu_back(trace.fc2_out, g);
    g = fc_back(trace.fc1_out, "fc2", g);
    g = relu_back(trace.fc1_out, g);
    g = fc_back(last_s2, "fc1", g);  // grad comes back in s2's shape

    for (std::size_t ri = spec.stages.size(); ri-- > 0;) {
        const auto& st = spec.stages[ri];
        const auto& t = trace.stages[ri];
        const std::int64_t bw = st.branch_width;

        TensorT<T> gdeep, gff;
        if (!spec.ablation) {
            // adjoint of the concat: split by channel range, deep branch first
            gdeep = slice_channels(g, 0, bw);
            gff = slice_channels(g, bw, 2 * bw);
            if (fault == BackwardFault::concat && !fired_concat) {
                std::swap(gdeep, gff);
                fired_concat = true;
            }
        } else {
            gdeep = std::move(g);
        }

        TensorT<T> gd = relu_back(t.s2c3, gdeep);
        gd = conv_back(t.s2c2, st.deep[2], stage_name(ri) + ".s2c3", gd);
        gd = relu_back(t.s2c2, gd);
        gd = conv_back(t.s2c1, st.deep[1], stage_name(ri) + ".s2c2", gd);
        gd = relu_back(t.s2c1, gd);
        TensorT<T> gs1 = conv_back(t.s1, st.deep[0], stage_name(ri) + ".s2c1", gd);

        if (!spec.ablation) {
            TensorT<T> gf = relu_back(t.b2c1, gff);
            TensorT<T> gs1_ff = conv_back(t.s1, st.ff, stage_name(ri) + ".b2c1", gf);
            add_inplace(gs1, gs1_ff);  // both branches feed the stage input
        }
        g = std::move(gs1);
    }
}

template class ParamStoreT<float>;
template class ParamStoreT<double>;
template ParamStoreT<float> init_params<float>(const NetworkSpec&, std::uint64_t);
template ParamStoreT<double> init_params<double>(const NetworkSpec&, std::uint64_t);
template TensorT<float> forward<float>(const NetworkSpec&, const ParamStoreT<float>&,
                                       const TensorT<float>&, ForwardTraceT<float>*);
template TensorT<double> forward<double>(const NetworkSpec&, const ParamStoreT<double>&,
                                         const TensorT<double>&, ForwardTraceT<double>*);
template void backward<float>(const NetworkSpec&, ParamStoreT<float>&,
                              const ForwardTraceT<float>&, const TensorT<float>&);
template void backward<double>(const NetworkSpec&, ParamStoreT<double>&,
                               const ForwardTraceT<double>&, const TensorT<double>&);

}  // namespace ffnet
