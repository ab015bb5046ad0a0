#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "lpreform/errors.hpp"
#include "lpreform/lp_core.hpp"

namespace lpreform {

namespace {

enum class Section { None, Name, ObjSense, Rows, Columns, Rhs, Ranges, Bounds, End };

std::vector<std::string_view> tokenize(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

double parse_number(std::string_view tok, std::size_t line) {
    double v = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    if (!tok.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        throw ParseError(line, "expected a number, found '" + std::string(tok) + "'");
    }
    if (v >= kMpsInfinity) return kInfinity;
    if (v <= -kMpsInfinity) return -kInfinity;
    return v;
}

std::string format_number(double v) {
    if (v == kInfinity) return "1e+30";
    if (v == -kInfinity) return "-1e+30";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

class MpsParser {
public:
    LpInstance parse(std::istream& in) {
        std::string raw;
        while (std::getline(in, raw)) {
            ++line_no_;
            if (!raw.empty() && raw.back() == '\r') raw.pop_back();
            if (raw.empty() || raw[0] == '*') continue;
            auto tokens = tokenize(raw);
            if (tokens.empty()) continue;
            bool header = !std::isspace(static_cast<unsigned char>(raw[0]));
            if (header) {
                start_section(tokens);
                if (section_ == Section::End) break;
                continue;
            }
            data_line(tokens);
        }
        if (section_ != Section::End) throw ParseError(line_no_, "missing ENDATA");
        return finish();
    }

private:
    void start_section(const std::vector<std::string_view>& tokens) {
        std::string_view key = tokens[0];
        if (key == "NAME") {
            section_ = Section::Name;
            if (tokens.size() > 1) lp_.name = std::string(tokens[1]);
        } else if (key == "OBJSENSE") {
            section_ = Section::ObjSense;
            if (tokens.size() > 1) set_sense(tokens[1]);
        } else if (key == "ROWS") {
            section_ = Section::Rows;
        } else if (key == "COLUMNS") {
            section_ = Section::Columns;
        } else if (key == "RHS") {
            section_ = Section::Rhs;
        } else if (key == "RANGES") {
            section_ = Section::Ranges;
        } else if (key == "BOUNDS") {
            section_ = Section::Bounds;
        } else if (key == "ENDATA") {
            section_ = Section::End;
        } else if (key == "SOS" || key == "QUADOBJ" || key == "QMATRIX" || key == "QCMATRIX" || key == "QSECTION" ||
                   key == "CSECTION" || key == "INDICATORS") {
            throw UnsupportedFeature("MPS section " + std::string(key) + " is not supported");
        } else {
            throw ParseError(line_no_, "unknown section '" + std::string(key) + "'");
        }
    }

    void set_sense(std::string_view tok) {
        if (tok == "MAX" || tok == "MAXIMIZE") {
            lp_.sense = ObjectiveSense::Maximize;
        } else if (tok == "MIN" || tok == "MINIMIZE") {
            lp_.sense = ObjectiveSense::Minimize;
        } else {
            throw ParseError(line_no_, "unknown objective sense '" + std::string(tok) + "'");
        }
    }

    void data_line(const std::vector<std::string_view>& t) {
        switch (section_) {
            case Section::ObjSense: set_sense(t[0]); break;
            case Section::Rows: row_line(t); break;
            case Section::Columns: column_line(t); break;
            case Section::Rhs: value_line(t, /*ranges=*/false); break;
            case Section::Ranges: value_line(t, /*ranges=*/true); break;
            case Section::Bounds: bound_line(t); break;
            default: throw ParseError(line_no_, "data line outside of a section");
        }
    }

    void row_line(const std::vector<std::string_view>& t) {
        if (t.size() != 2) throw ParseError(line_no_, "ROWS entries need a type and a name");
        std::string name(t[1]);
        if (t[0] == "N") {
            if (objective_name_.empty()) {
                objective_name_ = name;
                lp_.objective_name = name;
            } else {
                spdlog::warn("MPS line {}: dropping extra free row '{}'", line_no_, name);
                dropped_rows_.emplace(name, true);
            }
            return;
        }
        RowSense sense;
        if (t[0] == "L") {
            sense = RowSense::LE;
        } else if (t[0] == "G") {
            sense = RowSense::GE;
        } else if (t[0] == "E") {
            sense = RowSense::EQ;
        } else {
            throw ParseError(line_no_, "unknown row type '" + std::string(t[0]) + "'");
        }
        if (row_index_.count(name) || name == objective_name_) throw ParseError(line_no_, "duplicate row '" + name + "'");
        row_index_.emplace(name, lp_.row_names.size());
        lp_.row_names.push_back(name);
        lp_.row_sense.push_back(sense);
        lp_.rhs.push_back(0.0);
        lp_.row_range.push_back(0.0);
    }

    void column_line(const std::vector<std::string_view>& t) {
        if (t.size() >= 3 && t[1] == "'MARKER'") {
            if (t[2] == "'INTORG'") {
                in_integer_block_ = true;
            } else if (t[2] == "'INTEND'") {
                in_integer_block_ = false;
            } else {
                throw ParseError(line_no_, "unknown marker " + std::string(t[2]));
            }
            return;
        }
        if (t.size() != 3 && t.size() != 5) throw ParseError(line_no_, "COLUMNS entries need 3 or 5 fields");
        std::size_t col = column(t[0]);
        if (in_integer_block_) relaxed_integer(col);
        for (std::size_t k = 1; k + 1 < t.size(); k += 2) {
            double v = parse_number(t[k + 1], line_no_);
            if (!std::isfinite(v)) throw ParseError(line_no_, "infinite coefficient");
            std::string row(t[k]);
            if (row == objective_name_) {
                lp_.objective[col] = v;
            } else if (dropped_rows_.count(row)) {
                continue;
            } else {
                auto it = row_index_.find(row);
                if (it == row_index_.end()) throw ParseError(line_no_, "unknown row '" + row + "'");
                if (v == 0.0) continue;
                std::uint64_t key = (static_cast<std::uint64_t>(it->second) << 32) | col;
                if (!seen_entries_.insert(key).second) {
                    throw ParseError(line_no_, "duplicate entry for row '" + row + "'");
                }
                entries_.push_back({it->second, col, v});
            }
        }
    }

    std::size_t column(std::string_view name) {
        std::string key(name);
        auto it = col_index_.find(key);
        if (it != col_index_.end()) return it->second;
        std::size_t j = lp_.col_names.size();
        col_index_.emplace(key, j);
        lp_.col_names.push_back(key);
        lp_.objective.push_back(0.0);
        lp_.col_lower.push_back(0.0);
        lp_.col_upper.push_back(kInfinity);
        return j;
    }

    std::size_t existing_column(std::string_view name) {
        auto it = col_index_.find(std::string(name));
        if (it == col_index_.end()) throw ParseError(line_no_, "unknown column '" + std::string(name) + "'");
        return it->second;
    }

    void relaxed_integer(std::size_t col) {
        if (!warned_integer_) {
            spdlog::warn("MPS: integer columns are relaxed to continuous (first: '{}')", lp_.col_names[col]);
            warned_integer_ = true;
        }
    }

    void value_line(const std::vector<std::string_view>& t, bool ranges) {
        // Free format: the set name is optional, so an even token count means it is absent.
        std::size_t first = t.size() % 2 == 0 ? 0 : 1;
        if (t.size() < 2 || t.size() > 5) throw ParseError(line_no_, "malformed RHS/RANGES entry");
        for (std::size_t k = first; k + 1 < t.size(); k += 2) {
            std::string row(t[k]);
            double v = parse_number(t[k + 1], line_no_);
            if (!std::isfinite(v)) throw ParseError(line_no_, "infinite RHS/RANGES value");
            if (row == objective_name_) {
                if (ranges) throw ParseError(line_no_, "range on the objective row");
                lp_.objective_offset = -v;
                continue;
            }
            if (dropped_rows_.count(row)) continue;
            auto it = row_index_.find(row);
            if (it == row_index_.end()) throw ParseError(line_no_, "unknown row '" + row + "'");
            (ranges ? lp_.row_range : lp_.rhs)[it->second] = v;
        }
    }

    void bound_line(const std::vector<std::string_view>& t) {
        std::string_view type = t[0];
        bool needs_value = type == "UP" || type == "LO" || type == "FX" || type == "LI" || type == "UI";
        bool valueless = type == "FR" || type == "MI" || type == "PL" || type == "BV";
        if (type == "SC") throw UnsupportedFeature("semi-continuous bounds are not supported");
        if (!needs_value && !valueless) throw ParseError(line_no_, "unknown bound type '" + std::string(type) + "'");

        std::size_t fields = t.size();
        std::size_t col_pos;
        if (needs_value) {
            if (fields == 4) {
                col_pos = 2;
            } else if (fields == 3) {
                col_pos = 1;
            } else {
                throw ParseError(line_no_, "malformed bound entry");
            }
        } else {
            if (fields == 3) {
                col_pos = 2;
            } else if (fields == 2) {
                col_pos = 1;
            } else if (type == "BV" && fields == 4) {
                col_pos = 2;  // some writers append a value to BV
            } else {
                throw ParseError(line_no_, "malformed bound entry");
            }
        }
        std::size_t j = existing_column(t[col_pos]);
        double v = needs_value ? parse_number(t[col_pos + 1], line_no_) : 0.0;
        double& lo = lp_.col_lower[j];
        double& up = lp_.col_upper[j];
        if (type == "UP" || type == "UI") {
            if (type == "UI") relaxed_integer(j);
            if (v < 0.0 && lo == 0.0) {
                spdlog::warn("MPS line {}: negative upper bound on '{}' with zero lower bound, lower set to -inf",
                             line_no_, lp_.col_names[j]);
                lo = -kInfinity;
            }
            up = v;
        } else if (type == "LO" || type == "LI") {
            if (type == "LI") relaxed_integer(j);
            lo = v;
        } else if (type == "FX") {
            lo = v;
            up = v;
        } else if (type == "FR") {
            lo = -kInfinity;
            up = kInfinity;
        } else if (type == "MI") {
            lo = -kInfinity;
        } else if (type == "PL") {
            up = kInfinity;
        } else if (type == "BV") {
            relaxed_integer(j);
            lo = 0.0;
            up = 1.0;
        }
    }

    LpInstance finish() {
        if (objective_name_.empty()) throw ParseError(line_no_, "no objective (N) row");
        lp_.matrix = SparseMatrix::from_triplets(lp_.row_names.size(), lp_.col_names.size(), std::move(entries_));
        try {
            lp_.validate();
        } catch (const InvalidInstance& e) {
            throw ParseError(line_no_, e.what());
        }
        return std::move(lp_);
    }

    LpInstance lp_;
    Section section_ = Section::None;
    std::size_t line_no_ = 0;
    std::string objective_name_;
    std::unordered_map<std::string, std::size_t> row_index_;
    std::unordered_map<std::string, std::size_t> col_index_;
    std::unordered_map<std::string, bool> dropped_rows_;
    std::unordered_set<std::uint64_t> seen_entries_;
    std::vector<SparseMatrix::Triplet> entries_;
    bool in_integer_block_ = false;
    bool warned_integer_ = false;
};

}  // namespace

LpInstance parse_mps(std::istream& in) { return MpsParser().parse(in); }

LpInstance read_mps(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return parse_mps(in);
}

void format_mps(const LpInstance& lp, std::ostream& out) {
    lp.validate();
    out << "NAME " << lp.name << '\n';
    if (lp.sense == ObjectiveSense::Maximize) out << "OBJSENSE\n    MAX\n";
    out << "ROWS\n";
    out << " N  " << lp.objective_name << '\n';
    for (std::size_t i = 0; i < lp.num_rows(); ++i) {
        const char* t = lp.row_sense[i] == RowSense::LE ? "L" : lp.row_sense[i] == RowSense::GE ? "G" : "E";
        out << ' ' << t << "  " << lp.row_names[i] << '\n';
    }
    out << "COLUMNS\n";
    for (std::size_t j = 0; j < lp.num_cols(); ++j) {
        const std::string& name = lp.col_names[j];
        auto rows = lp.matrix.column_rows(j);
        auto vals = lp.matrix.column_values(j);
        if (lp.objective[j] != 0.0 || rows.empty()) {
            out << "    " << name << "  " << lp.objective_name << "  " << format_number(lp.objective[j]) << '\n';
        }
        for (std::size_t k = 0; k < rows.size(); ++k) {
            out << "    " << name << "  " << lp.row_names[rows[k]] << "  " << format_number(vals[k]) << '\n';
        }
    }
    out << "RHS\n";
    for (std::size_t i = 0; i < lp.num_rows(); ++i) {
        if (lp.rhs[i] != 0.0) out << "    RHS  " << lp.row_names[i] << "  " << format_number(lp.rhs[i]) << '\n';
    }
    if (lp.objective_offset != 0.0) {
        out << "    RHS  " << lp.objective_name << "  " << format_number(-lp.objective_offset) << '\n';
    }
    bool any_range = false;
    for (double r : lp.row_range) any_range = any_range || r != 0.0;
    if (any_range) {
        out << "RANGES\n";
        for (std::size_t i = 0; i < lp.num_rows(); ++i) {
            if (lp.row_range[i] != 0.0) out << "    RNG  " << lp.row_names[i] << "  " << format_number(lp.row_range[i]) << '\n';
        }
    }
    std::ostringstream bounds;
    for (std::size_t j = 0; j < lp.num_cols(); ++j) {
        const std::string& name = lp.col_names[j];
        double lo = lp.col_lower[j];
        double up = lp.col_upper[j];
        if (lo == 0.0 && up == kInfinity) continue;
        if (lo == up) {
            bounds << " FX BND  " << name << "  " << format_number(lo) << '\n';
            continue;
        }
        if (lo == -kInfinity && up == kInfinity) {
            bounds << " FR BND  " << name << '\n';
            continue;
        }
        if (lo == -kInfinity) {
            bounds << " MI BND  " << name << '\n';
        } else if (lo != 0.0) {
            bounds << " LO BND  " << name << "  " << format_number(lo) << '\n';
        }
        if (up != kInfinity) bounds << " UP BND  " << name << "  " << format_number(up) << '\n';
    }
    if (!bounds.str().empty()) out << "BOUNDS\n" << bounds.str();
    out << "ENDATA\n";
}

void write_mps(const LpInstance& lp, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    format_mps(lp, out);
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace lpreform
