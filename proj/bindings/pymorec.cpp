#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "morec/experiment.hpp"

namespace py = pybind11;
using namespace morec;

namespace {

py::dict report_to_dict(const EvalReport& r) {
    py::dict d;
    d["hit"] = r.hit;
    d["rhit"] = r.rhit;
    d["pop_kl"] = r.pop_kl;
    d["min_hit"] = r.min_hit;
    d["k"] = r.k;
    d["n_eval_users"] = r.n_eval_users;
    py::dict ch;
    for (const auto& [cat, h] : r.category_hits) ch[py::int_(cat)] = h;
    d["category_hits"] = ch;
    return d;
}

}  // namespace

PYBIND11_MODULE(_morec, m) {
    m.doc() = "Tri-level multi-objective training for a matrix-factorization recommender";

    py::enum_<Objective>(m, "Objective")
        .value("accuracy", Objective::accuracy)
        .value("revenue", Objective::revenue)
        .value("fairness", Objective::fairness)
        .value("alignment", Objective::alignment);

    py::enum_<LossMode>(m, "LossMode").value("bpr", LossMode::bpr).value("bce", LossMode::bce);

    py::enum_<CoordinatorMode>(m, "CoordinatorMode")
        .value("pi", CoordinatorMode::pi)
        .value("static_weights", CoordinatorMode::static_weights);

    py::enum_<EvalSplit>(m, "EvalSplit")
        .value("valid", EvalSplit::valid)
        .value("test", EvalSplit::test);

    py::class_<SynthConfig>(m, "SynthConfig")
        .def(py::init<>())
        .def_readwrite("n_users", &SynthConfig::n_users)
        .def_readwrite("n_items", &SynthConfig::n_items)
        .def_readwrite("n_interactions", &SynthConfig::n_interactions)
        .def_readwrite("n_categories", &SynthConfig::n_categories)
        .def_readwrite("zipf_exponent", &SynthConfig::zipf_exponent)
        .def_readwrite("price_min", &SynthConfig::price_min)
        .def_readwrite("price_max", &SynthConfig::price_max)
        .def_readwrite("latent_dim", &SynthConfig::latent_dim);

    py::class_<RawInteractions>(m, "RawInteractions")
        .def("__len__", [](const RawInteractions& r) { return r.records.size(); })
        .def_property_readonly("kcore_warning",
                               [](const RawInteractions& r) { return r.kcore_warning; })
        .def("tuples", [](const RawInteractions& r) {
            py::list out;
            for (const RawRecord& rec : r.records)
                out.append(py::make_tuple(rec.user, rec.item, rec.timestamp));
            return out;
        });

    py::class_<ItemMeta>(m, "ItemMeta")
        .def_readonly("item", &ItemMeta::item)
        .def_readonly("category", &ItemMeta::category)
        .def_readonly("price", &ItemMeta::price);

    py::class_<SynthResult>(m, "SynthResult")
        .def_readonly("interactions", &SynthResult::interactions)
        .def_readonly("items", &SynthResult::items);

    py::class_<InteractionDataset>(m, "InteractionDataset")
        .def_property_readonly("n_users", [](const InteractionDataset& d) { return d.n_users; })
        .def_property_readonly("n_items", [](const InteractionDataset& d) { return d.n_items; })
        .def_property_readonly("n_train",
                               [](const InteractionDataset& d) { return d.train.size(); })
        .def_property_readonly("n_valid",
                               [](const InteractionDataset& d) { return d.valid.size(); })
        .def_property_readonly("n_test",
                               [](const InteractionDataset& d) { return d.test.size(); });

    py::class_<ItemCatalog>(m, "ItemCatalog")
        .def_readonly("price", &ItemCatalog::price)
        .def_readonly("category", &ItemCatalog::category)
        .def_readonly("category_names", &ItemCatalog::category_names)
        .def_readonly("pop_count", &ItemCatalog::pop_count)
        .def_readonly("pop_bucket", &ItemCatalog::pop_bucket)
        .def_readonly("n_buckets", &ItemCatalog::n_buckets);

    py::class_<MfModel>(m, "MfModel")
        .def_property_readonly("n_users", [](const MfModel& mdl) { return mdl.n_users; })
        .def_property_readonly("n_items", [](const MfModel& mdl) { return mdl.n_items; })
        .def_property_readonly("dim", [](const MfModel& mdl) { return mdl.dim; })
        .def("score", &MfModel::score, py::arg("user"), py::arg("item"))
        .def("topk",
             [](const MfModel& mdl, int user, int k, const std::vector<int>& exclude) {
                 std::vector<int> sorted = exclude;
                 std::sort(sorted.begin(), sorted.end());
                 return topk_recommend(mdl, user, k, sorted);
             },
             py::arg("user"), py::arg("k") = 10, py::arg("exclude") = std::vector<int>{});

    py::class_<PiController>(m, "PiController")
        .def(py::init([](double kp, double ki, double alpha_min, double target_loss) {
                 return make_pi_controller(kp, ki, alpha_min, target_loss);
             }),
             py::arg("kp") = 0.01, py::arg("ki") = 0.001, py::arg("alpha_min") = 0.1,
             py::arg("target_loss") = 0.2)
        .def("step",
             [](PiController& pi, double loss) {
                 const auto out = pi.step(loss);
                 return py::make_tuple(out.alpha_acc, out.err, out.err_sum);
             },
             py::arg("batch_loss"));

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("dim", &TrainConfig::dim)
        .def_readwrite("use_bias", &TrainConfig::use_bias)
        .def_readwrite("init_std", &TrainConfig::init_std)
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("weight_decay", &TrainConfig::weight_decay)
        .def_readwrite("loss_mode", &TrainConfig::loss_mode)
        .def_readwrite("n_negatives", &TrainConfig::n_negatives)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("max_epochs", &TrainConfig::max_epochs)
        .def_readwrite("patience", &TrainConfig::patience)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("eval_k", &TrainConfig::eval_k)
        .def_readwrite("objectives", &TrainConfig::objectives)
        .def_readwrite("mode", &TrainConfig::mode)
        .def_readwrite("rho_full", &TrainConfig::rho_full)
        .def_property(
            "rho", [](const TrainConfig& c) { return c.pref.rho; },
            [](TrainConfig& c, std::vector<double> rho) { c.pref.rho = std::move(rho); })
        .def_property(
            "lam", [](const TrainConfig& c) { return c.pref.lambda; },
            [](TrainConfig& c, double v) { c.pref.lambda = v; })
        .def_readwrite("kp", &TrainConfig::kp)
        .def_readwrite("ki", &TrainConfig::ki)
        .def_readwrite("alpha_min", &TrainConfig::alpha_min)
        .def_readwrite("alpha_step", &TrainConfig::alpha_step)
        .def_readwrite("weight_floor", &TrainConfig::weight_floor);

    m.def("synth_generate", &synth_generate, py::arg("cfg"), py::arg("seed"));
    m.def("kcore_filter", &kcore_filter, py::arg("raw"), py::arg("k"));
    m.def("leave_one_out_split", &leave_one_out_split, py::arg("raw"));
    m.def("build_catalog", &build_catalog, py::arg("metadata"), py::arg("dataset"),
          py::arg("n_buckets") = 10);
    m.def("make_model", &make_model, py::arg("n_users"), py::arg("n_items"), py::arg("dim"),
          py::arg("use_bias") = true, py::arg("init_std") = 0.1, py::arg("seed") = 42);

    m.def("pretrain",
          [](const MfModel& model, const InteractionDataset& ds, const ItemCatalog& cat,
             const TrainConfig& cfg) {
              PretrainResult r = pretrain(model, ds, cat, cfg);
              py::list epochs;
              for (const EpochRecord& e : r.history.epochs)
                  epochs.append(py::make_tuple(e.epoch, e.mean_acc_loss, e.valid_report.hit));
              return py::make_tuple(r.model, r.converged_loss, epochs);
          },
          py::arg("model"), py::arg("dataset"), py::arg("catalog"), py::arg("cfg"));

    m.def("continual_train",
          [](const MfModel& model, const InteractionDataset& ds, const ItemCatalog& cat,
             const TrainConfig& cfg, double target_loss) {
              ContinualResult r = continual_train(model, ds, cat, cfg, target_loss);
              py::list epochs;
              for (const EpochRecord& e : r.history.epochs)
                  epochs.append(py::make_tuple(e.epoch, e.mean_acc_loss, e.mean_alpha_acc,
                                               e.valid_imp));
              return py::make_tuple(r.model, epochs, r.best_valid_imp);
          },
          py::arg("model"), py::arg("dataset"), py::arg("catalog"), py::arg("cfg"),
          py::arg("target_loss"));

    m.def("evaluate",
          [](const MfModel& model, const InteractionDataset& ds, const ItemCatalog& cat,
             EvalSplit split, int k) {
              return report_to_dict(evaluate(model, ds, cat, split, k));
          },
          py::arg("model"), py::arg("dataset"), py::arg("catalog"),
          py::arg("split") = EvalSplit::test, py::arg("k") = 10);

    m.def("imp",
          [](const py::dict& base, const py::dict& solution) {
              EvalReport b, s;
              b.hit = base["hit"].cast<double>();
              b.rhit = base["rhit"].cast<double>();
              b.pop_kl = base["pop_kl"].cast<double>();
              b.min_hit = base["min_hit"].cast<double>();
              s.hit = solution["hit"].cast<double>();
              s.rhit = solution["rhit"].cast<double>();
              s.pop_kl = solution["pop_kl"].cast<double>();
              s.min_hit = solution["min_hit"].cast<double>();
              return imp(b, s);
          },
          py::arg("base"), py::arg("solution"));

    m.def("pareto_frontier", &pareto_frontier, py::arg("points"), py::arg("maximize"));

    m.def("run_experiment",
          [](const std::string& config_path, const std::string& out,
             std::optional<std::uint64_t> seed, int jobs) {
              ExperimentConfig cfg = load_experiment_config(config_path);
              if (seed) {
                  cfg.seed = *seed;
                  cfg.backbone.seed = *seed;
              }
              if (!out.empty()) cfg.out_dir = out;
              return run_experiment(cfg, jobs);
          },
          py::arg("config_path"), py::arg("out") = std::string{},
          py::arg("seed") = std::nullopt, py::arg("jobs") = 1);
}
