#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dess/checkpoint.hpp"
#include "dess/corpus.hpp"
#include "dess/eval.hpp"
#include "dess/head.hpp"
#include "dess/synthetic.hpp"
#include "dess/train.hpp"

namespace py = pybind11;
using namespace dess;

namespace {

TripletSets sets_from_py(const std::map<std::string, std::vector<Triplet>>& in) {
    TripletSets out;
    for (const auto& [id, ts] : in) out[id] = std::set<Triplet>(ts.begin(), ts.end());
    return out;
}

}  // namespace

PYBIND11_MODULE(pydess, m) {
    m.doc() = "Dual-channel aspect sentiment triplet extraction";

    py::class_<Span>(m, "Span")
        .def(py::init<int, int>(), py::arg("start"), py::arg("end"))
        .def_readwrite("start", &Span::start)
        .def_readwrite("end", &Span::end)
        .def("width", &Span::width)
        .def("__repr__", [](const Span& s) {
            return "Span(" + std::to_string(s.start) + ", " + std::to_string(s.end) + ")";
        })
        .def("__eq__", [](const Span& a, const Span& b) { return a == b; });

    py::enum_<Sentiment>(m, "Sentiment")
        .value("POS", Sentiment::POS)
        .value("NEU", Sentiment::NEU)
        .value("NEG", Sentiment::NEG);

    py::class_<Triplet>(m, "Triplet")
        .def(py::init<Span, Span, Sentiment>(), py::arg("aspect"), py::arg("opinion"),
             py::arg("sentiment"))
        .def_readwrite("aspect", &Triplet::aspect)
        .def_readwrite("opinion", &Triplet::opinion)
        .def_readwrite("sentiment", &Triplet::sentiment)
        .def("__eq__", [](const Triplet& a, const Triplet& b) { return a == b; });

    py::class_<Sentence>(m, "Sentence")
        .def_readonly("id", &Sentence::id)
        .def_readonly("tokens", &Sentence::tokens)
        .def_property_readonly("gold", [](const Sentence& s) {
            return std::vector<Triplet>(s.gold.begin(), s.gold.end());
        });

    py::class_<DatasetStats>(m, "DatasetStats")
        .def_readonly("num_sentences", &DatasetStats::num_sentences)
        .def_readonly("num_triplets", &DatasetStats::num_triplets)
        .def_readonly("pos", &DatasetStats::pos)
        .def_readonly("neu", &DatasetStats::neu)
        .def_readonly("neg", &DatasetStats::neg);

    py::class_<Metrics>(m, "Metrics")
        .def_readonly("precision", &Metrics::precision)
        .def_readonly("recall", &Metrics::recall)
        .def_readonly("f1", &Metrics::f1)
        .def_readonly("tp", &Metrics::tp)
        .def_readonly("fp", &Metrics::fp)
        .def_readonly("fn", &Metrics::fn);

    m.def("parse_aste_line", &parse_aste_line, py::arg("line"));
    m.def("serialize_sentence", &serialize_sentence, py::arg("sentence"));
    m.def("load_sentences", &load_sentences, py::arg("path"), py::arg("split_name"));
    m.def("dataset_stats", &dataset_stats, py::arg("sentences"));
    m.def("enumerate_spans", &enumerate_spans, py::arg("seq_len"), py::arg("max_span"));
    m.def("synthetic_corpus", &synthetic_corpus, py::arg("n"), py::arg("seed"),
          py::arg("id_prefix") = "synth");
    m.def(
        "exact_match",
        [](const std::map<std::string, std::vector<Triplet>>& pred,
           const std::map<std::string, std::vector<Triplet>>& gold) {
            return exact_match(sets_from_py(pred), sets_from_py(gold));
        },
        py::arg("pred"), py::arg("gold"));
    m.def(
        "predict_file",
        [](const std::string& checkpoint_path, const std::string& data_path) {
            LoadedCheckpoint ck = load_checkpoint(checkpoint_path);
            auto sents = load_sentences(data_path, "data");
            std::map<std::string, std::vector<Triplet>> out;
            for (const auto& s : sents) {
                EncodedSentence enc = encode_sentence(ck.vocab, s, ck.cfg.encoder.max_len);
                ad::Tape t;
                Binding bind(t, ck.store);
                auto pred = predict_sentence(bind, ck.cfg, enc.ids, enc.dep_adj);
                out[s.id] = std::vector<Triplet>(pred.triplets.begin(), pred.triplets.end());
            }
            return out;
        },
        py::arg("checkpoint_path"), py::arg("data_path"));
}
