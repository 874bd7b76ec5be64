// Python bindings. Structured results cross the boundary as JSON text and
// are decoded by the package wrapper.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "tripletalign/behav_eval.hpp"
#include "tripletalign/cli.hpp"
#include "tripletalign/error.hpp"
#include "tripletalign/oracle.hpp"
#include "tripletalign/results_io.hpp"

namespace py = pybind11;
using namespace tripletalign;

namespace {

nlohmann::json triplet_json(const Triplet& t) {
  return {{"id", t.id}, {"anchor", t.anchor}, {"target1", t.target1}, {"target2", t.target2}};
}

std::string dataset_json(const std::string& path) {
  const auto d = load_triplets(path);
  nlohmann::json j{{"triplets", nlohmann::json::array()}, {"judgments", nlohmann::json::array()}};
  for (const auto& t : d.triplets) j["triplets"].push_back(triplet_json(t));
  for (const auto& r : d.judgments) {
    j["judgments"].push_back({{"id", r.triplet_id},
                              {"votes1", r.votes1},
                              {"votes2", r.votes2},
                              {"majority", std::string(to_string(majority(r)))},
                              {"agreement", agreement(r)}});
  }
  return j.dump();
}

std::string stats_json(const std::string& path) {
  const auto d = load_triplets(path);
  const auto s = dataset_stats(d);
  const auto eval = build_eval_set(d);
  return nlohmann::json{{"triplets", s.triplets},
                        {"unique_terms", s.unique_terms},
                        {"labeled", s.labeled},
                        {"ties", s.ties},
                        {"eval_size", s.eval_size},
                        {"human_baseline", eval.empty() ? 0.0 : human_baseline(eval)}}
      .dump();
}

std::string evaluate_json(const std::string& dataset, const std::string& bundle_dir, bool center,
                          std::size_t bootstrap, std::uint64_t seed, std::size_t threads) {
  const auto eval = build_eval_set(load_triplets(dataset));
  const auto bundle = read_bundle(bundle_dir);
  EvalOptions o;
  o.center = center;
  o.threads = threads;
  if (bootstrap == 0) {
    o.bootstrap.reset();
  } else {
    o.bootstrap->resamples = bootstrap;
    o.bootstrap->seed = seed;
  }
  ReprResultFile r;
  r.name = bundle.model_id;
  {
    py::gil_scoped_release release;
    r.evaluation = evaluate_model(bundle, eval, o);
  }
  for (const auto& item : eval) r.triplet_ids.push_back(item.triplet.id);
  return to_json(r).dump();
}

std::string naive_json(const std::string& dataset, const std::string& bundle_dir, bool center) {
  const auto eval = build_eval_set(load_triplets(dataset));
  return to_json(oracle::naive_eval(read_bundle(bundle_dir), eval, center)).dump();
}

Triplet make_triplet(const std::string& anchor, const std::string& t1, const std::string& t2) {
  return {"py", anchor, t1, t2};
}

std::vector<std::pair<std::string, std::string>> prompt(const std::string& anchor, const std::string& t1,
                                                        const std::string& t2, const std::string& variant,
                                                        const std::string& order) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& m : build_prompt(make_triplet(anchor, t1, t2), parse_prompt_variant(variant),
                                    parse_presented_order(order))) {
    out.emplace_back(m.role, m.content);
  }
  return out;
}

std::pair<std::optional<std::string>, std::optional<std::string>> parse(const std::string& raw,
                                                                        const std::string& anchor,
                                                                        const std::string& t1, const std::string& t2,
                                                                        const std::string& order) {
  const auto a = parse_response(raw, make_triplet(anchor, t1, t2), parse_presented_order(order));
  std::pair<std::optional<std::string>, std::optional<std::string>> out;
  if (a.choice) out.first = std::string(to_string(*a.choice));
  if (a.invalid) out.second = std::string(to_string(*a.invalid));
  return out;
}

void fixtures(const std::string& out_dir, const std::string& spec_json) {
  oracle::write_fixtures(oracle::synth_spec_from_json(nlohmann::json::parse(spec_json)), out_dir);
}

std::tuple<int, std::string, std::string> run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = 0;
  {
    py::gil_scoped_release release;
    code = cli::run(args, out, err);
  }
  return {code, out.str(), err.str()};
}

}  // namespace

PYBIND11_MODULE(_tripletalign, m) {
  m.doc() = "Triplet alignment harness core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  m.def("load_dataset_json", &dataset_json, py::arg("path"));
  m.def("dataset_stats_json", &stats_json, py::arg("path"));
  m.def("verify_bundle", [](const std::string& dir) { return verify_bundle(dir); }, py::arg("path"));
  m.def("evaluate_json", &evaluate_json, py::arg("dataset"), py::arg("bundle"), py::arg("center") = true,
        py::arg("bootstrap") = 0, py::arg("seed") = 0, py::arg("threads") = 0);
  m.def("naive_eval_json", &naive_json, py::arg("dataset"), py::arg("bundle"), py::arg("center") = true);
  m.def("presented_order", [](std::int64_t seed, const std::string& id) {
    return std::string(to_string(presented_order(seed, id)));
  }, py::arg("seed"), py::arg("triplet_id"));
  m.def("build_prompt", &prompt, py::arg("anchor"), py::arg("target1"), py::arg("target2"),
        py::arg("variant") = "full", py::arg("order") = "original");
  m.def("parse_response", &parse, py::arg("raw"), py::arg("anchor"), py::arg("target1"), py::arg("target2"),
        py::arg("order") = "original");
  m.def("normalize_answer", [](const std::string& s) { return normalize_answer(s); }, py::arg("raw"));
  m.def("write_fixtures_json", &fixtures, py::arg("out_dir"), py::arg("spec_json"));
  m.def("default_spec_json", [] { return oracle::to_json(oracle::SynthSpec{}).dump(); });
  m.def("run_cli", &run_cli, py::arg("args"));
}
