# Tests package for deltabk
