#include <gtest/gtest.h>

#include "eprlab/runtime.hpp"

int main(int argc, char** argv) {
  eprlab::tune_allocator();
  ::testing::InitGoogleTest(&argc, argv);
  return RUN_ALL_TESTS();
}
