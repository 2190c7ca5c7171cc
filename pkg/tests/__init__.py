# Tests package for BuildCheck 