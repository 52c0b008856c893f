#ifndef EPM_IO_HPP
#define EPM_IO_HPP

// Text formats: shortest round-trip numbers, a small CSV reader/writer,
// performance-record rows, DE trajectories and the benchmark catalog.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include <epm/benchmarks.hpp>
#include <epm/de.hpp>

namespace epm {

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s)
{
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::runtime_error("not a number: '" + std::string(s) + "'");
    return v;
}

template <typename Int>
Int parse_integer(std::string_view s)
{
    Int v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::runtime_error("not an integer: '" + std::string(s) + "'");
    return v;
}

inline std::string csv_escape(std::string_view field)
{
    if (field.find_first_of(",\"\n") == std::string_view::npos)
        return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + '"';
}

/// Splits one CSV line; double quotes delimit fields that contain commas.
inline std::vector<std::string> csv_split(std::string_view line)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted)
        throw std::runtime_error("unterminated quoted CSV field");
    out.push_back(std::move(cur));
    return out;
}

/// Rows of a CSV file keyed by its header; '#' lines are comments.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(std::string_view name) const
    {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name)
                return i;
        throw std::runtime_error("CSV has no column '" + std::string(name) + "'");
    }
};

inline CsvTable read_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    CsvTable t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line.front() == '#')
            continue;
        const bool last = in.peek() == std::char_traits<char>::eof();
        std::vector<std::string> fields;
        try {
            fields = csv_split(line);
        } catch (const std::runtime_error&) {
            // A truncated last line (interrupted writer) is dropped.
            if (last && !t.header.empty())
                break;
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": unterminated quoted field");
        }
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size()) {
            if (last)
                break;
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(t.header.size())
                + " fields, got " + std::to_string(fields.size()));
        }
        t.rows.push_back(std::move(fields));
    }
    return t;
}

inline constexpr std::string_view performance_header = "problem_id,dimension,NP,F,CR,n_runs,mean_error,run_errors_json,base_seed,max_fes";

inline std::string performance_row(const PerformanceRecord& r)
{
    std::string errs = "[";
    for (std::size_t i = 0; i < r.run_errors.size(); ++i) {
        if (i)
            errs += ',';
        errs += format_double(r.run_errors[i]);
    }
    errs += ']';
    std::ostringstream os;
    os << problem_label(r.problem_id) << ',' << r.dimension << ',' << r.config.np << ',' << format_double(r.config.f) << ','
       << format_double(r.config.cr) << ',' << r.n_runs << ',' << format_double(r.mean_error) << ',' << csv_escape(errs) << ','
       << r.base_seed << ',' << r.max_fes;
    return os.str();
}

inline std::vector<PerformanceRecord> parse_performance(const CsvTable& t)
{
    const std::size_t c_pid = t.column("problem_id"), c_d = t.column("dimension"), c_np = t.column("NP"), c_f = t.column("F"),
                      c_cr = t.column("CR"), c_n = t.column("n_runs"), c_mean = t.column("mean_error"),
                      c_errs = t.column("run_errors_json"), c_seed = t.column("base_seed"), c_fes = t.column("max_fes");
    std::vector<PerformanceRecord> out;
    out.reserve(t.rows.size());
    for (const auto& row : t.rows) {
        PerformanceRecord r;
        r.problem_id = parse_problem_id(row[c_pid]);
        r.dimension = parse_integer<int>(row[c_d]);
        r.config = {parse_integer<int>(row[c_np]), parse_double(row[c_f]), parse_double(row[c_cr])};
        r.n_runs = parse_integer<int>(row[c_n]);
        r.mean_error = parse_double(row[c_mean]);
        // Errors are stored with shortest round-trip text; reparse from the
        // raw tokens so no precision is lost through a JSON double parser.
        std::string_view errs = row[c_errs];
        if (errs.size() < 2 || errs.front() != '[' || errs.back() != ']')
            throw std::runtime_error("run_errors_json is not a JSON array: " + std::string(errs));
        errs = errs.substr(1, errs.size() - 2);
        while (!errs.empty()) {
            const auto comma = errs.find(',');
            r.run_errors.push_back(parse_double(errs.substr(0, comma)));
            if (comma == std::string_view::npos)
                break;
            errs.remove_prefix(comma + 1);
        }
        r.base_seed = parse_integer<std::uint64_t>(row[c_seed]);
        r.max_fes = parse_integer<long>(row[c_fes]);
        if (static_cast<int>(r.run_errors.size()) != r.n_runs)
            throw std::runtime_error("record has " + std::to_string(r.run_errors.size()) + " run errors but n_runs = " + std::to_string(r.n_runs));
        out.push_back(std::move(r));
    }
    return out;
}

inline void write_trajectory_csv(std::ostream& os, const RunResult& run)
{
    os << "fes,best_value\n";
    for (const auto& c : run.trajectory)
        os << c.fes << ',' << format_double(c.best_value) << '\n';
}

inline nlohmann::ordered_json catalog_json(const std::vector<ProblemInstance>& problems)
{
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : problems) {
        nlohmann::ordered_json j;
        j["id"] = problem_label(p.id);
        j["name"] = p.name;
        j["dimension"] = p.dimension;
        j["bounds"] = {{"lower", p.lower_bounds}, {"upper", p.upper_bounds}};
        j["unimodal"] = p.unimodal;
        j["seed"] = p.seed;
        arr.push_back(std::move(j));
    }
    return arr;
}

/// Writes `text` to `path` through a temporary file and a rename, so readers
/// never observe a half-written file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view text)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write " + tmp.string());
        out << text;
        if (!out.flush())
            throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace epm

#endif // EPM_IO_HPP
