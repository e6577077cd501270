#include <openssl/sha.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "navguard/error.hpp"
#include "navguard/verifier.hpp"

namespace navguard::verify {

std::string relationName(Relation r) {
  switch (r) {
    case Relation::LE: return "<=";
    case Relation::GE: return ">=";
    case Relation::EQ: return "==";
  }
  return "?";
}

Relation parseRelation(const std::string& s) {
  if (s == "<=") return Relation::LE;
  if (s == ">=") return Relation::GE;
  if (s == "==") return Relation::EQ;
  throw FormatError("unknown relation '" + s + "'");
}

std::string tagName(ConstraintTag t) {
  switch (t) {
    case ConstraintTag::Affine: return "affine";
    case ConstraintTag::Link: return "link";
    case ConstraintTag::Post: return "post";
    case ConstraintTag::Extra: return "extra";
  }
  return "?";
}

ConstraintTag parseTag(const std::string& s) {
  if (s == "affine") return ConstraintTag::Affine;
  if (s == "link") return ConstraintTag::Link;
  if (s == "post") return ConstraintTag::Post;
  if (s == "extra") return ConstraintTag::Extra;
  throw FormatError("unknown constraint tag '" + s + "'");
}

std::string statusName(Status s) {
  switch (s) {
    case Status::SAT: return "SAT";
    case Status::UNSAT: return "UNSAT";
    case Status::TIMEOUT: return "TIMEOUT";
    case Status::ERROR: return "ERROR";
  }
  return "?";
}

Status parseStatus(const std::string& s) {
  if (s == "SAT") return Status::SAT;
  if (s == "UNSAT") return Status::UNSAT;
  if (s == "TIMEOUT") return Status::TIMEOUT;
  if (s == "ERROR") return Status::ERROR;
  throw FormatError("unknown verdict status '" + s + "'");
}

Query Query::make(std::shared_ptr<const Network> net, std::size_t copies, Interval box) {
  Query q;
  q.copies = copies;
  q.input_boxes.assign(copies, std::vector<Interval>(net->inputDim(), box));
  q.network = std::move(net);
  return q;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

Json refToJson(const VarRef& r) {
  return Json{{"copy", r.copy},
              {"role", r.role == VarRef::Role::Input ? "in" : "out"},
              {"index", r.index}};
}

VarRef refFromJson(const Json& j) {
  VarRef r;
  r.copy = j.at("copy").get<std::size_t>();
  const std::string role = j.at("role").get<std::string>();
  if (role == "in") {
    r.role = VarRef::Role::Input;
  } else if (role == "out") {
    r.role = VarRef::Role::Output;
  } else {
    throw FormatError("unknown variable role '" + role + "'");
  }
  r.index = j.at("index").get<std::size_t>();
  return r;
}

std::string sha256Hex(const std::string& data) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
  std::string hex;
  char buf[3];
  for (unsigned char c : digest) {
    std::snprintf(buf, sizeof(buf), "%02x", c);
    hex += buf;
  }
  return hex;
}

}  // namespace

Json constraintToJson(const QueryConstraint& qc) {
  Json terms = Json::array();
  for (const QueryTerm& t : qc.terms) {
    Json tj = refToJson(t.ref);
    tj["coef"] = t.coef;
    terms.push_back(tj);
  }
  return Json{{"terms", terms},
              {"rel", relationName(qc.rel)},
              {"rhs", qc.rhs},
              {"tag", tagName(qc.tag)},
              {"label", qc.label}};
}

QueryConstraint constraintFromJson(const Json& cj) {
  try {
    QueryConstraint qc;
    for (const Json& tj : cj.at("terms")) qc.terms.push_back({refFromJson(tj), tj.at("coef").get<double>()});
    qc.rel = parseRelation(cj.at("rel").get<std::string>());
    qc.rhs = cj.at("rhs").get<double>();
    qc.tag = parseTag(cj.value("tag", std::string("post")));
    qc.label = cj.value("label", std::string());
    return qc;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed constraint: ") + e.what());
  }
}

Json queryToJson(const Query& q) {
  Json j;
  j["name"] = q.name;
  j["copies"] = q.copies;
  j["network"] = q.network ? saveNetwork(*q.network) : std::string();
  Json boxes = Json::array();
  for (const auto& copy : q.input_boxes) {
    Json c = Json::array();
    for (const Interval& iv : copy) c.push_back(Json::array({iv.lo, iv.hi}));
    boxes.push_back(c);
  }
  j["input_boxes"] = boxes;
  Json cons = Json::array();
  for (const QueryConstraint& qc : q.constraints) cons.push_back(constraintToJson(qc));
  j["constraints"] = cons;
  return j;
}

Query queryFromJson(const Json& j) {
  try {
    Query q;
    q.name = j.value("name", std::string());
    q.copies = j.at("copies").get<std::size_t>();
    q.network = std::make_shared<const Network>(loadNetwork(j.at("network").get<std::string>()));
    for (const Json& c : j.at("input_boxes")) {
      std::vector<Interval> copy;
      for (const Json& iv : c) copy.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
      q.input_boxes.push_back(std::move(copy));
    }
    for (const Json& cj : j.at("constraints")) q.constraints.push_back(constraintFromJson(cj));
    return q;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed query document: ") + e.what());
  }
}

std::string queryHash(const Query& q) { return sha256Hex(queryToJson(q).dump()); }

// ---------------------------------------------------------------------------
// compile

std::size_t LinearSystem::count(ConstraintTag tag) const {
  return static_cast<std::size_t>(std::count_if(
      constraints.begin(), constraints.end(), [&](const LinearConstraint& c) { return c.tag == tag; }));
}

std::size_t LinearSystem::resolve(const VarRef& ref) const {
  if (ref.copy >= copies.size()) {
    throw ConfigError("constraint references copy " + std::to_string(ref.copy) + " of " +
                      std::to_string(copies.size()));
  }
  const CopyLayout& c = copies[ref.copy];
  const auto& vec = ref.role == VarRef::Role::Input ? c.inputs : c.outputs;
  if (ref.index >= vec.size()) {
    throw ConfigError(std::string("constraint references ") +
                      (ref.role == VarRef::Role::Input ? "input " : "output ") +
                      std::to_string(ref.index) + " of " + std::to_string(vec.size()));
  }
  return vec[ref.index];
}

LinearSystem compile(const Query& query) {
  if (!query.network) throw ConfigError("query has no network");
  if (query.copies == 0) throw ConfigError("query needs at least one network copy");
  const Network& net = *query.network;
  if (query.input_boxes.size() != query.copies) {
    throw ShapeError("query has " + std::to_string(query.input_boxes.size()) +
                     " input boxes for " + std::to_string(query.copies) + " copies");
  }
  LinearSystem sys;
  sys.network = query.network;
  auto addVar = [&](std::string name, Interval box) {
    sys.variables.push_back({std::move(name), box});
    return sys.variables.size() - 1;
  };
  for (std::size_t c = 0; c < query.copies; ++c) {
    const auto& boxes = query.input_boxes[c];
    if (boxes.size() != net.inputDim()) {
      throw ShapeError("copy " + std::to_string(c) + " has " + std::to_string(boxes.size()) +
                       " input bounds, network takes " + std::to_string(net.inputDim()));
    }
    const std::string prefix = "c" + std::to_string(c) + ".";
    CopyLayout lay;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      const Interval& b = boxes[i];
      if (!std::isfinite(b.lo) || !std::isfinite(b.hi)) {
        throw ConfigError("input " + std::to_string(i) + " of copy " + std::to_string(c) +
                          " is unbounded; every input needs a finite box");
      }
      if (b.lo > b.hi) {
        throw ConfigError("input " + std::to_string(i) + " of copy " + std::to_string(c) +
                          " has lo > hi");
      }
      lay.inputs.push_back(addVar(prefix + "x" + std::to_string(i), b));
    }
    std::vector<std::size_t> prev = lay.inputs;
    for (std::size_t li = 0; li < net.numLayers(); ++li) {
      const AffineLayer& layer = net.layer(li);
      const bool hidden = li + 1 < net.numLayers();
      std::vector<std::size_t> pre, post;
      for (std::size_t u = 0; u < layer.outWidth(); ++u) {
        const std::string name = hidden ? prefix + "h" + std::to_string(li) + "." + std::to_string(u)
                                        : prefix + "y" + std::to_string(u);
        pre.push_back(addVar(hidden ? name + ".pre" : name, {}));
      }
      for (std::size_t u = 0; u < layer.outWidth(); ++u) {
        LinearConstraint eq;
        eq.tag = ConstraintTag::Affine;
        eq.rel = Relation::EQ;
        auto w = layer.weights.row(u);
        for (std::size_t i = 0; i < w.size(); ++i) {
          if (w[i] != 0.0) eq.terms.push_back({prev[i], w[i]});
        }
        eq.terms.push_back({pre[u], -1.0});
        eq.rhs = -layer.biases[u];
        sys.constraints.push_back(std::move(eq));
      }
      if (hidden) {
        for (std::size_t u = 0; u < layer.outWidth(); ++u) {
          post.push_back(addVar(sys.variables[pre[u]].name.substr(
                                    0, sys.variables[pre[u]].name.size() - 4) + ".post",
                                {}));
          sys.relus.push_back({pre[u], post.back()});
        }
        lay.pre.push_back(pre);
        lay.post.push_back(post);
        prev = post;
      } else {
        lay.outputs = pre;
      }
    }
    sys.copies.push_back(std::move(lay));
  }
  for (const QueryConstraint& qc : query.constraints) {
    if (qc.tag == ConstraintTag::Affine) throw ConfigError("queries cannot add affine constraints");
    if (!std::isfinite(qc.rhs)) throw ValueError("non-finite constraint right-hand side");
    LinearConstraint lc;
    lc.rel = qc.rel;
    lc.rhs = qc.rhs;
    lc.tag = qc.tag;
    lc.label = qc.label;
    for (const QueryTerm& t : qc.terms) {
      if (!std::isfinite(t.coef)) throw ValueError("non-finite constraint coefficient");
      lc.terms.push_back({sys.resolve(t.ref), t.coef});
    }
    sys.constraints.push_back(std::move(lc));
  }
  return sys;
}

Json systemToJson(const LinearSystem& s) {
  Json j;
  Json vars = Json::array();
  for (const Variable& v : s.variables) {
    Json vj{{"name", v.name}};
    if (std::isfinite(v.box.lo)) vj["lo"] = v.box.lo;
    if (std::isfinite(v.box.hi)) vj["hi"] = v.box.hi;
    vars.push_back(vj);
  }
  j["variables"] = vars;
  Json cons = Json::array();
  for (const LinearConstraint& c : s.constraints) {
    Json terms = Json::array();
    for (const LinearTerm& t : c.terms) terms.push_back(Json::array({t.var, t.coef}));
    cons.push_back(Json{{"terms", terms},
                        {"rel", relationName(c.rel)},
                        {"rhs", c.rhs},
                        {"tag", tagName(c.tag)},
                        {"label", c.label}});
  }
  j["constraints"] = cons;
  Json relus = Json::array();
  for (const ReluPair& r : s.relus) relus.push_back(Json::array({r.pre, r.post}));
  j["relus"] = relus;
  return j;
}

// ---------------------------------------------------------------------------
// Witness checks

namespace {

template <typename Num>
double residualOf(const Num& lhs, Relation rel, const Num& rhs) {
  Num r = 0;
  switch (rel) {
    case Relation::GE: r = rhs - lhs; break;
    case Relation::LE: r = lhs - rhs; break;
    case Relation::EQ: r = lhs > rhs ? Num(lhs - rhs) : Num(rhs - lhs); break;
  }
  if (r < 0) return 0.0;
  if constexpr (std::is_same_v<Num, double>) {
    return r;
  } else {
    return r.get_d();
  }
}

template <typename Num>
Num toNum(double v) {
  return Num(v);
}

// Evaluates every copy and returns the value of each system variable.
template <typename Num>
std::vector<Num> allValues(const LinearSystem& sys, const std::vector<std::vector<Num>>& inputs) {
  const Network& net = *sys.network;
  if (inputs.size() != sys.numCopies()) {
    throw DimensionError("witness copies", sys.numCopies(), inputs.size());
  }
  std::vector<Num> val(sys.variables.size(), Num(0));
  for (std::size_t c = 0; c < sys.numCopies(); ++c) {
    const CopyLayout& lay = sys.copies[c];
    if (inputs[c].size() != lay.inputs.size()) {
      throw DimensionError("witness input", lay.inputs.size(), inputs[c].size());
    }
    std::vector<Num> cur = inputs[c];
    for (std::size_t i = 0; i < cur.size(); ++i) val[lay.inputs[i]] = cur[i];
    for (std::size_t li = 0; li < net.numLayers(); ++li) {
      const AffineLayer& layer = net.layer(li);
      std::vector<Num> next(layer.outWidth());
      for (std::size_t u = 0; u < layer.outWidth(); ++u) {
        Num acc = toNum<Num>(layer.biases[u]);
        auto w = layer.weights.row(u);
        for (std::size_t i = 0; i < w.size(); ++i) {
          if (w[i] != 0.0) acc += toNum<Num>(w[i]) * cur[i];
        }
        next[u] = acc;
      }
      if (li + 1 < net.numLayers()) {
        for (std::size_t u = 0; u < next.size(); ++u) {
          val[lay.pre[li][u]] = next[u];
          if (next[u] < 0) next[u] = 0;
          val[lay.post[li][u]] = next[u];
        }
      } else {
        for (std::size_t u = 0; u < next.size(); ++u) val[lay.outputs[u]] = next[u];
      }
      cur = std::move(next);
    }
  }
  return val;
}

template <typename Num>
double maxResidual(const LinearSystem& sys, const std::vector<std::vector<Num>>& inputs) {
  const std::vector<Num> val = allValues(sys, inputs);
  double worst = 0.0;
  for (std::size_t c = 0; c < sys.numCopies(); ++c) {
    for (std::size_t i = 0; i < sys.copies[c].inputs.size(); ++i) {
      const std::size_t v = sys.copies[c].inputs[i];
      const Interval& b = sys.variables[v].box;
      worst = std::max(worst, residualOf(val[v], Relation::GE, toNum<Num>(b.lo)));
      worst = std::max(worst, residualOf(val[v], Relation::LE, toNum<Num>(b.hi)));
    }
  }
  for (const LinearConstraint& lc : sys.constraints) {
    if (lc.tag == ConstraintTag::Affine) continue;
    Num lhs = 0;
    for (const LinearTerm& t : lc.terms) lhs += toNum<Num>(t.coef) * val[t.var];
    worst = std::max(worst, residualOf(lhs, lc.rel, toNum<Num>(lc.rhs)));
  }
  return worst;
}

}  // namespace

WitnessCheck checkWitness(const LinearSystem& sys, const std::vector<Vector>& inputs,
                          double tolerance) {
  for (const Vector& v : inputs) {
    for (double x : v) {
      if (!std::isfinite(x)) return {false, kInf};
    }
  }
  const double r = maxResidual<double>(sys, inputs);
  return {r <= tolerance, r};
}

WitnessCheck checkWitnessExact(const LinearSystem& sys,
                               const std::vector<std::vector<mpq_class>>& inputs,
                               const mpq_class& tolerance) {
  // Residuals are compared exactly; the reported value is rounded.
  const std::vector<mpq_class> val = allValues(sys, inputs);
  bool ok = true;
  double worst = 0.0;
  auto account = [&](const mpq_class& lhs, Relation rel, const mpq_class& rhs) {
    mpq_class r;
    switch (rel) {
      case Relation::GE: r = rhs - lhs; break;
      case Relation::LE: r = lhs - rhs; break;
      case Relation::EQ: r = abs(lhs - rhs); break;
    }
    if (r > tolerance) ok = false;
    if (r > 0) worst = std::max(worst, r.get_d());
  };
  for (std::size_t c = 0; c < sys.numCopies(); ++c) {
    for (std::size_t v : sys.copies[c].inputs) {
      account(val[v], Relation::GE, mpq_class(sys.variables[v].box.lo));
      account(val[v], Relation::LE, mpq_class(sys.variables[v].box.hi));
    }
  }
  for (const LinearConstraint& lc : sys.constraints) {
    if (lc.tag == ConstraintTag::Affine) continue;
    mpq_class lhs = 0;
    for (const LinearTerm& t : lc.terms) lhs += mpq_class(t.coef) * val[t.var];
    account(lhs, lc.rel, mpq_class(lc.rhs));
  }
  return {ok, worst};
}

// ---------------------------------------------------------------------------
// Verdict records

Json verdictToJson(const Verdict& v, bool include_timing) {
  Json j;
  j["status"] = statusName(v.status);
  j["query_hash"] = v.query_hash;
  if (!v.diagnostic.empty()) j["diagnostic"] = v.diagnostic;
  if (v.witness) {
    Json w;
    w["inputs"] = v.witness->inputs;
    w["outputs"] = v.witness->outputs;
    if (!v.witness->exact_inputs.empty()) {
      Json ex = Json::array();
      for (const auto& copy : v.witness->exact_inputs) {
        Json c = Json::array();
        for (const mpq_class& q : copy) c.push_back(q.get_str());
        ex.push_back(c);
      }
      w["exact_inputs"] = ex;
    }
    j["witness"] = w;
  }
  Json s{{"nodes", v.stats.nodes},
         {"leaves", v.stats.leaves},
         {"lp_calls", v.stats.lp_calls},
         {"pruned", v.stats.pruned},
         {"max_depth", v.stats.max_depth}};
  if (include_timing) s["wall_time_s"] = v.stats.wall_time_s;
  j["stats"] = s;
  return j;
}

Verdict verdictFromJson(const Json& j) {
  try {
    Verdict v;
    v.status = parseStatus(j.at("status").get<std::string>());
    v.query_hash = j.value("query_hash", std::string());
    v.diagnostic = j.value("diagnostic", std::string());
    if (j.contains("witness")) {
      Witness w;
      w.inputs = j.at("witness").at("inputs").get<std::vector<Vector>>();
      w.outputs = j.at("witness").value("outputs", std::vector<Vector>{});
      if (j.at("witness").contains("exact_inputs")) {
        for (const Json& c : j.at("witness").at("exact_inputs")) {
          std::vector<mpq_class> copy;
          for (const Json& q : c) copy.emplace_back(q.get<std::string>());
          w.exact_inputs.push_back(std::move(copy));
        }
      }
      v.witness = std::move(w);
    }
    if (j.contains("stats")) {
      const Json& s = j.at("stats");
      v.stats.nodes = s.value("nodes", std::uint64_t{0});
      v.stats.leaves = s.value("leaves", std::uint64_t{0});
      v.stats.lp_calls = s.value("lp_calls", std::uint64_t{0});
      v.stats.pruned = s.value("pruned", std::uint64_t{0});
      v.stats.max_depth = s.value("max_depth", std::size_t{0});
      v.stats.wall_time_s = s.value("wall_time_s", 0.0);
    }
    return v;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed verdict record: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("malformed rational in verdict record: ") + e.what());
  }
}

}  // namespace navguard::verify
