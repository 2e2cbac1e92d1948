#include "adalab/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <string_view>
#include <vector>

namespace adalab {

namespace {

bool parse_double(std::string_view text, double& out) {
  // from_chars for double is available in libstdc++ 11
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec == std::errc() && ptr == text.data() + text.size()) return true;
  // allow an explicit leading '+'
  if (!text.empty() && text.front() == '+') {
    auto [p2, e2] = std::from_chars(text.data() + 1, text.data() + text.size(), out);
    return e2 == std::errc() && p2 == text.data() + text.size();
  }
  return false;
}

}  // namespace

Dataset Dataset::head(Eigen::Index count) const {
  Dataset out;
  count = std::min(count, n());
  out.rows = rows.topRows(count);
  out.labels = labels.head(count);
  return out;
}

Dataset load_libsvm(const std::string& path, std::optional<Eigen::Index> dim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open libsvm file: " + path);

  std::vector<Eigen::Triplet<double, int>> entries;
  std::vector<double> labels;
  long max_index = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view rest(line);
    auto next_token = [&rest]() -> std::string_view {
      const auto start = rest.find_first_not_of(" \t");
      if (start == std::string_view::npos) {
        rest = {};
        return {};
      }
      rest.remove_prefix(start);
      const auto end = rest.find_first_of(" \t");
      auto tok = rest.substr(0, end);
      rest.remove_prefix(end == std::string_view::npos ? rest.size() : end);
      return tok;
    };

    auto label_tok = next_token();
    if (label_tok.empty()) continue;  // blank line
    double label = 0.0;
    if (!parse_double(label_tok, label)) throw ParseError(line_no, "bad label '" + std::string(label_tok) + "'");
    const int row = static_cast<int>(labels.size());
    labels.push_back(label > 0.0 ? 1.0 : -1.0);

    long prev = 0;
    for (auto tok = next_token(); !tok.empty(); tok = next_token()) {
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) throw ParseError(line_no, "expected idx:val, got '" + std::string(tok) + "'");
      long idx = 0;
      auto idx_text = tok.substr(0, colon);
      auto [p, ec] = std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), idx);
      if (ec != std::errc() || p != idx_text.data() + idx_text.size() || idx < 1)
        throw ParseError(line_no, "bad feature index '" + std::string(idx_text) + "'");
      if (idx <= prev) throw ParseError(line_no, "feature indices must be strictly ascending");
      if (dim && idx > *dim) throw ParseError(line_no, "feature index exceeds dimension");
      double val = 0.0;
      if (!parse_double(tok.substr(colon + 1), val) || !std::isfinite(val))
        throw ParseError(line_no, "bad feature value in '" + std::string(tok) + "'");
      prev = idx;
      max_index = std::max(max_index, idx);
      entries.emplace_back(row, static_cast<int>(idx - 1), val);
    }
  }

  Dataset data;
  const Eigen::Index d = dim ? *dim : static_cast<Eigen::Index>(max_index);
  data.rows.resize(static_cast<Eigen::Index>(labels.size()), d);
  data.rows.setFromTriplets(entries.begin(), entries.end());
  data.rows.makeCompressed();
  data.labels = Eigen::Map<const Eigen::VectorXd>(labels.data(), static_cast<Eigen::Index>(labels.size()));
  return data;
}

}  // namespace adalab
