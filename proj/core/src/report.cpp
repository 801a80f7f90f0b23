#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "coge/dataset_io.hpp"
#include "coge/eval.hpp"

namespace coge {
namespace {

using nlohmann::json;

json stats_to_json(const ClassStats& s) { return {{"mean", s.mean}, {"std", s.std}, {"count", s.count}}; }

ClassStats stats_from_json(const json& j) {
    return {j.at("mean").get<double>(), j.at("std").get<double>(), j.at("count").get<int>()};
}

}  // namespace

std::string reports_to_csv(const std::vector<MethodReport>& reports) {
    std::ostringstream out;
    out << "method,cycle_mean,cycle_std,clique_mean,clique_std,avg\n";
    out << std::setprecision(6) << std::fixed;
    for (const MethodReport& r : reports) {
        out << r.method << ',' << r.cycle.mean << ',' << r.cycle.std << ',' << r.clique.mean << ','
            << r.clique.std << ',' << r.average << '\n';
    }
    return out.str();
}

std::string reports_to_json(const std::vector<MethodReport>& reports) {
    json arr = json::array();
    for (const MethodReport& r : reports) {
        arr.push_back({
            {"method", r.method},
            {"cycle", stats_to_json(r.cycle)},
            {"clique", stats_to_json(r.clique)},
            {"avg", r.average},
            {"failures", r.failures},
            {"failure_messages", r.failure_messages},
            {"graph_ids", r.graph_ids},
            {"labels", r.labels},
            {"accuracies", r.accuracies},
        });
    }
    return json{{"reports", std::move(arr)}}.dump(2);
}

std::vector<MethodReport> reports_from_json(const std::string& text) {
    std::vector<MethodReport> out;
    const json doc = json::parse(text);
    for (const json& j : doc.at("reports")) {
        MethodReport r;
        r.method = j.at("method").get<std::string>();
        r.cycle = stats_from_json(j.at("cycle"));
        r.clique = stats_from_json(j.at("clique"));
        r.average = j.at("avg").get<double>();
        r.failures = j.at("failures").get<int>();
        r.failure_messages = j.at("failure_messages").get<std::vector<std::string>>();
        r.graph_ids = j.at("graph_ids").get<std::vector<int>>();
        r.labels = j.at("labels").get<std::vector<int>>();
        r.accuracies = j.at("accuracies").get<std::vector<double>>();
        out.push_back(std::move(r));
    }
    return out;
}

void emit_report(const std::vector<MethodReport>& reports, const std::filesystem::path& path,
                 ReportFormat format) {
    write_file_atomically(path, format == ReportFormat::csv ? reports_to_csv(reports)
                                                            : reports_to_json(reports));
}

}  // namespace coge
