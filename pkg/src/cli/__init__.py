'''
Command-line interface: `recast fit-source | calibrate | predict | replicate | diagnostics`.
'''
