#ifndef DTCD_TESTS_GRADCHECK_HPP
#define DTCD_TESTS_GRADCHECK_HPP

#include "dtcd/gradcheck.hpp"

namespace dtcd::testing {
using dtcd::contract;
using dtcd::max_grad_error;
using dtcd::random_tensor;
}  // namespace dtcd::testing

#endif
