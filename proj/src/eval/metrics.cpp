#include "mensp/eval/metrics.hpp"

#include <algorithm>

#include "mensp/errors.hpp"

namespace mensp {

namespace {

void check_inputs(const std::vector<GradeLevel>& human, const std::vector<GradeLevel>& machine) {
  if (human.size() != machine.size())
    throw DataError("rating vectors differ in length (" + std::to_string(human.size()) + " vs " +
                    std::to_string(machine.size()) + ")");
  if (human.empty()) throw DataError("rating vectors are empty");
}

struct ClassStats {
  double f1 = 0.0;
  long support = 0;
  long predicted = 0;
};

std::vector<ClassStats> per_class(const ConfusionCounts& cm) {
  const int g = cm.num_levels();
  std::vector<ClassStats> out(static_cast<std::size_t>(g));
  for (int c = 0; c < g; ++c) {
    const auto cc = static_cast<std::size_t>(c);
    long tp = cm.counts[cc][cc], row = 0, col = 0;
    for (int j = 0; j < g; ++j) {
      row += cm.counts[cc][static_cast<std::size_t>(j)];
      col += cm.counts[static_cast<std::size_t>(j)][cc];
    }
    out[cc].support = row;
    out[cc].predicted = col;
    const double precision = col == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(col);
    const double recall = row == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(row);
    out[cc].f1 = precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
  }
  return out;
}

}  // namespace

ConfusionCounts ConfusionCounts::from(const std::vector<GradeLevel>& human, const std::vector<GradeLevel>& machine,
                                      int num_levels) {
  check_inputs(human, machine);
  int g = num_levels;
  for (std::size_t i = 0; i < human.size(); ++i) {
    if (human[i].value < 0 || machine[i].value < 0) throw DataError("negative grade in rating vector");
    g = std::max({g, human[i].value + 1, machine[i].value + 1});
  }
  ConfusionCounts cm;
  cm.counts.assign(static_cast<std::size_t>(g), std::vector<long>(static_cast<std::size_t>(g), 0));
  for (std::size_t i = 0; i < human.size(); ++i)
    ++cm.counts[static_cast<std::size_t>(human[i].value)][static_cast<std::size_t>(machine[i].value)];
  return cm;
}

long ConfusionCounts::total() const {
  long t = 0;
  for (const auto& row : counts)
    for (long v : row) t += v;
  return t;
}

double cohens_kappa(const std::vector<GradeLevel>& human, const std::vector<GradeLevel>& machine) {
  const auto cm = ConfusionCounts::from(human, machine);
  const double n = static_cast<double>(cm.total());
  const auto stats = per_class(cm);
  double agree = 0.0, chance = 0.0;
  for (std::size_t c = 0; c < stats.size(); ++c) {
    agree += static_cast<double>(cm.counts[c][c]);
    chance += static_cast<double>(stats[c].support) * static_cast<double>(stats[c].predicted);
  }
  if (chance == n * n) return 1.0;
  return (n * agree - chance) / (n * n - chance);
}

double f1_weighted(const std::vector<GradeLevel>& human, const std::vector<GradeLevel>& machine) {
  const auto cm = ConfusionCounts::from(human, machine);
  double sum = 0.0;
  long total = 0;
  for (const auto& s : per_class(cm)) {
    sum += s.f1 * static_cast<double>(s.support);
    total += s.support;
  }
  return sum / static_cast<double>(total);
}

double f1_macro(const std::vector<GradeLevel>& human, const std::vector<GradeLevel>& machine) {
  const auto cm = ConfusionCounts::from(human, machine);
  double sum = 0.0;
  int used = 0;
  for (const auto& s : per_class(cm)) {
    if (s.support == 0 && s.predicted == 0) continue;
    sum += s.f1;
    ++used;
  }
  return sum / static_cast<double>(used);
}

}  // namespace mensp
