# Services package for the warped-product map verification engine
