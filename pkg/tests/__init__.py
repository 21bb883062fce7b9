# qes-engine tests
