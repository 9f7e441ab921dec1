// Builds a small column-regular binary matrix and compares its coherence with
// a DeVore matrix and a random one.

#include <coherence_forge/baselines.hpp>
#include <coherence_forge/binary_construct.hpp>

#include <iostream>

int main() {
  namespace cf = coherence_forge;
  cf::OptimizerConfig cfg;
  cfg.seed = 7;
  const cf::Construction c = cf::construct(9, 27, 3, cfg);
  const cf::BinaryMatrix devore = cf::devore_matrix({3, 2});
  const cf::BinaryMatrix random = cf::random_binary_matrix(9, 27, 3, 7);

  std::cout << "welch bound   " << cf::welch_bound(9, 27) << '\n'
            << "optimized     " << c.report.coherence << " ("
            << c.duplicates.size() << " duplicate column pairs)\n"
            << "devore(3, 2)  " << cf::coherence(devore).coherence << '\n'
            << "random        " << cf::coherence(random).coherence << '\n';
  cf::write_sparse(std::cout, c.matrix);
}
